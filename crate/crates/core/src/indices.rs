//! Normalized-difference spectral indices.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::{Grid, MultiBandRaster};

/// A pixel in the `(NDVI, NDWI, RE_NDWI)` feature space.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub ndvi: f64,
    pub ndwi: f64,
    pub re_ndwi: f64,
}

impl FeatureVector {
    pub fn new(ndvi: f64, ndwi: f64, re_ndwi: f64) -> Self {
        FeatureVector { ndvi, ndwi, re_ndwi }
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.ndvi, self.ndwi, self.re_ndwi]
    }

    pub fn from_array(a: [f64; 3]) -> Self {
        FeatureVector::new(a[0], a[1], a[2])
    }

    pub fn squared_distance(&self, other: &FeatureVector) -> f64 {
        self.to_array()
            .iter()
            .zip(other.to_array())
            .map(|(a, b)| (a - b) * (a - b))
            .sum()
    }
}

/// `(a − b) / (a + b)`, or 0 when both are zero.
pub fn normalized_difference(a: f64, b: f64) -> Result<f64> {
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "reflectances must be finite, got {a} and {b}"
        )));
    }
    if a < 0.0 || b < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "reflectances must be non-negative, got {a} and {b}"
        )));
    }
    let sum = a + b;
    if sum == 0.0 {
        return Ok(0.0);
    }
    Ok(((a - b) / sum).clamp(-1.0, 1.0))
}

pub fn ndvi(nir: f64, red: f64) -> Result<f64> {
    normalized_difference(nir, red)
}

pub fn ndwi(nir: f64, green: f64) -> Result<f64> {
    normalized_difference(nir, green)
}

pub fn re_ndwi(green: f64, rededge: f64) -> Result<f64> {
    normalized_difference(green, rededge)
}

/// Computes the three indices at every pixel.
pub fn feature_raster(r: &MultiBandRaster) -> Result<Grid<FeatureVector>> {
    let green = r.band("green")?.as_slice();
    let red = r.band("red")?.as_slice();
    let rededge = r.band("rededge")?.as_slice();
    let nir = r.band("nir")?.as_slice();
    let data = (0..green.len())
        .map(|i| {
            Ok(FeatureVector::new(
                ndvi(nir[i], red[i])?,
                ndwi(nir[i], green[i])?,
                re_ndwi(green[i], rededge[i])?,
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    Grid::from_vec(r.width(), r.height(), data)
}
