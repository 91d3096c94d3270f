//! Synthetic multi-spectral scenes with known ground truth, and scoring of
//! class maps against them.
//!
//! A scene is vegetated or bare land crossed by a river, a lake and a few
//! thin tributaries, with cloud discs and their shadows scattered on top.
//! Clouds and shadows are "confusers": their NIR response sits between the
//! water and land modes, so a good detector either rejects them or labels
//! them as ignorance.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::labels::ClassLabel;
use crate::raster::{read_pgm, write_pgm, Band, ClassMap, Grid, MultiBandRaster};

pub type Point = (f64, f64);

/// Mean and standard deviation per band, ordered blue, green, red, rededge, nir.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaterialProfile {
    pub mean: [f64; 5],
    pub std: [f64; 5],
}

impl MaterialProfile {
    pub const fn new(mean: [f64; 5], std: f64) -> Self {
        MaterialProfile {
            mean,
            std: [std; 5],
        }
    }

    pub fn nir(&self) -> f64 {
        self.mean[4]
    }
}

/// Endmember spectra. Water pixels mix clear and turbid water, land pixels
/// mix vegetation and soil.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Profiles {
    pub water: MaterialProfile,
    pub turbid_water: MaterialProfile,
    pub vegetation: MaterialProfile,
    pub soil: MaterialProfile,
    pub cloud: MaterialProfile,
    pub shadow: MaterialProfile,
}

impl Default for Profiles {
    fn default() -> Self {
        Profiles {
            water: MaterialProfile::new([4200.0, 3900.0, 2900.0, 2700.0, 3000.0], 30.0),
            turbid_water: MaterialProfile::new([5200.0, 5600.0, 5000.0, 5200.0, 5000.0], 30.0),
            vegetation: MaterialProfile::new([3200.0, 4200.0, 3300.0, 6800.0, 9000.0], 30.0),
            soil: MaterialProfile::new([4600.0, 5200.0, 5600.0, 5900.0, 6200.0], 30.0),
            cloud: MaterialProfile::new([7600.0, 7400.0, 7200.0, 7100.0, 7000.0], 250.0),
            shadow: MaterialProfile::new([2400.0, 2600.0, 2200.0, 3400.0, 6500.0], 250.0),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RiverSpec {
    pub points: Vec<Point>,
    pub width: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Disc {
    pub center: Point,
    pub radius: f64,
}

impl Disc {
    fn contains(&self, p: Point) -> bool {
        let (dx, dy) = (p.0 - self.center.0, p.1 - self.center.1);
        dx * dx + dy * dy <= self.radius * self.radius
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CloudSpec {
    pub count: usize,
    pub radius: (f64, f64),
    pub shadow_offset: Point,
}

impl Default for CloudSpec {
    fn default() -> Self {
        CloudSpec {
            count: 6,
            radius: (12.0, 28.0),
            shadow_offset: (25.0, 25.0),
        }
    }
}

/// Everything that determines a synthetic scene.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SceneSpec {
    pub width: usize,
    pub height: usize,
    pub seed: u64,
    pub river: RiverSpec,
    pub lake: Option<Disc>,
    pub n_streams: usize,
    pub stream_width: (f64, f64),
    /// Standard deviation of the random bend of each tributary, in pixels.
    pub stream_bend: f64,
    pub clouds: CloudSpec,
    pub profiles: Profiles,
    /// Beta parameters of the turbid-water fraction in water pixels.
    pub turbidity: (f64, f64),
    /// Beta parameters of the vegetation fraction in land pixels.
    pub vegetation_cover: (f64, f64),
    pub noise_std: f64,
}

impl Default for SceneSpec {
    fn default() -> Self {
        SceneSpec {
            width: 512,
            height: 512,
            seed: 42,
            river: RiverSpec {
                points: vec![
                    (0.0, 100.0),
                    (150.0, 160.0),
                    (260.0, 230.0),
                    (380.0, 300.0),
                    (512.0, 420.0),
                ],
                width: 40.0,
            },
            lake: Some(Disc {
                center: (380.0, 120.0),
                radius: 60.0,
            }),
            n_streams: 4,
            stream_width: (1.0, 2.0),
            stream_bend: 30.0,
            clouds: CloudSpec::default(),
            profiles: Profiles::default(),
            turbidity: (1.0, 60.0),
            vegetation_cover: (8.0, 1.0),
            noise_std: 30.0,
        }
    }
}

impl SceneSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        if self.width == 0 || self.height == 0 {
            return bad(format!("scene dimensions must be positive, got {}x{}", self.width, self.height));
        }
        if self.river.points.len() < 2 || !(self.river.width > 0.0) {
            return bad("river needs at least two points and a positive width".into());
        }
        let (lo, hi) = self.stream_width;
        if !(lo > 0.0 && lo <= hi) {
            return bad(format!("stream width range ({lo}, {hi}) is invalid"));
        }
        let (rlo, rhi) = self.clouds.radius;
        if !(rlo > 0.0 && rlo <= rhi) {
            return bad(format!("cloud radius range ({rlo}, {rhi}) is invalid"));
        }
        if !(self.noise_std >= 0.0 && self.stream_bend >= 0.0) {
            return bad("noise and bend deviations must be non-negative".into());
        }
        for (a, b) in [self.turbidity, self.vegetation_cover] {
            if !(a > 0.0 && b > 0.0) {
                return bad(format!("beta parameters ({a}, {b}) must be positive"));
            }
        }
        let p = &self.profiles;
        let all = [p.water, p.turbid_water, p.vegetation, p.soil, p.cloud, p.shadow];
        if all.iter().any(|m| m.std.iter().any(|s| !(*s >= 0.0))) {
            return bad("profile deviations must be non-negative".into());
        }
        if !(p.water.nir() < p.cloud.nir() && p.cloud.nir() < p.vegetation.nir()) {
            return bad("profiles must satisfy water NIR < cloud NIR < vegetation NIR".into());
        }
        Ok(())
    }

    /// NIR level halfway between the water and vegetation profiles.
    pub fn nir_midpoint(&self) -> f64 {
        0.5 * (self.profiles.water.nir() + self.profiles.vegetation.nir())
    }
}

/// Ground-truth class of a synthetic pixel.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Truth {
    Land,
    Water,
    Confuser,
}

impl Truth {
    pub fn gray(self) -> u8 {
        match self {
            Truth::Land => 0,
            Truth::Confuser => 128,
            Truth::Water => 255,
        }
    }

    pub fn from_gray(g: u8) -> Option<Self> {
        match g {
            0 => Some(Truth::Land),
            128 => Some(Truth::Confuser),
            255 => Some(Truth::Water),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Material {
    Land,
    Water,
    Cloud,
    Shadow,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Stream {
    pub points: Vec<Point>,
    pub width: f64,
}

/// Shapes actually drawn, after random placement.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneGeometry {
    pub river: RiverSpec,
    pub lake: Option<Disc>,
    pub streams: Vec<Stream>,
    pub clouds: Vec<Disc>,
    pub shadows: Vec<Disc>,
}

#[derive(Clone, Debug)]
pub struct Scene {
    pub raster: MultiBandRaster,
    pub truth: Grid<Truth>,
    pub geometry: SceneGeometry,
    pub warnings: Vec<String>,
}

pub fn segment_distance(p: Point, a: Point, b: Point) -> f64 {
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let len2 = dx * dx + dy * dy;
    let t = if len2 == 0.0 {
        0.0
    } else {
        (((p.0 - a.0) * dx + (p.1 - a.1) * dy) / len2).clamp(0.0, 1.0)
    };
    (p.0 - a.0 - t * dx).hypot(p.1 - a.1 - t * dy)
}

fn polyline_distance(p: Point, pts: &[Point]) -> f64 {
    pts.windows(2)
        .map(|w| segment_distance(p, w[0], w[1]))
        .fold(f64::INFINITY, f64::min)
}

fn uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * rng.random::<f64>()
}

fn normal(std: f64) -> Result<Normal<f64>> {
    Normal::new(0.0, std).map_err(|e| Error::InvalidArgument(e.to_string()))
}

fn beta((a, b): (f64, f64)) -> Result<Beta<f64>> {
    Beta::new(a, b).map_err(|e| Error::InvalidArgument(e.to_string()))
}

/// Draws a scene. The result is a pure function of `spec`.
pub fn generate(spec: &SceneSpec) -> Result<Scene> {
    spec.validate()?;
    let (w, h) = (spec.width, spec.height);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut warnings = Vec::new();

    let out_of_bounds = spec
        .river
        .points
        .iter()
        .filter(|p| p.0 < 0.0 || p.1 < 0.0 || p.0 > w as f64 || p.1 > h as f64)
        .count();
    if out_of_bounds > 0 {
        warnings.push(format!(
            "{out_of_bounds} river control point(s) lie outside the {w}x{h} scene; the river is clipped"
        ));
    }

    let center = |x: usize, y: usize| (x as f64 + 0.5, y as f64 + 0.5);
    let river_half = spec.river.width / 2.0;
    let mut material = Grid::from_fn(w, h, |x, y| {
        let p = center(x, y);
        let in_lake = spec.lake.is_some_and(|d| d.contains(p));
        if in_lake || polyline_distance(p, &spec.river.points) <= river_half {
            Material::Water
        } else {
            Material::Land
        }
    });

    let mut streams = Vec::with_capacity(spec.n_streams);
    for _ in 0..spec.n_streams {
        let start = (uniform(&mut rng, 0.0, w as f64), uniform(&mut rng, 0.0, h as f64));
        let end = spec.river.points[rng.random_range(0..spec.river.points.len())];
        let bend = normal(spec.stream_bend)?;
        let mid = (
            0.5 * (start.0 + end.0) + bend.sample(&mut rng),
            0.5 * (start.1 + end.1) + bend.sample(&mut rng),
        );
        let width = uniform(&mut rng, spec.stream_width.0, spec.stream_width.1);
        let stream = Stream {
            points: vec![start, mid, end],
            width,
        };
        for y in 0..h {
            for x in 0..w {
                if polyline_distance(center(x, y), &stream.points) <= width / 2.0 {
                    material.set(x, y, Material::Water);
                }
            }
        }
        streams.push(stream);
    }

    let mut clouds = Vec::with_capacity(spec.clouds.count);
    let mut shadows = Vec::with_capacity(spec.clouds.count);
    for _ in 0..spec.clouds.count {
        let c = (uniform(&mut rng, 0.0, w as f64), uniform(&mut rng, 0.0, h as f64));
        let radius = uniform(&mut rng, spec.clouds.radius.0, spec.clouds.radius.1);
        let cloud = Disc { center: c, radius };
        let shadow = Disc {
            center: (c.0 + spec.clouds.shadow_offset.0, c.1 + spec.clouds.shadow_offset.1),
            radius,
        };
        for y in 0..h {
            for x in 0..w {
                let p = center(x, y);
                if cloud.contains(p) {
                    material.set(x, y, Material::Cloud);
                } else if shadow.contains(p) && *material.get(x, y) == Material::Land {
                    material.set(x, y, Material::Shadow);
                }
            }
        }
        clouds.push(cloud);
        shadows.push(shadow);
    }

    let truth = material.map(|m| match m {
        Material::Land => Truth::Land,
        Material::Water => Truth::Water,
        Material::Cloud | Material::Shadow => Truth::Confuser,
    });

    let turbidity = beta(spec.turbidity)?;
    let cover = beta(spec.vegetation_cover)?;
    let noise = normal(spec.noise_std)?;
    let p = &spec.profiles;
    let material_noise = [p.water, p.vegetation, p.cloud, p.shadow]
        .map(|m| m.std.map(normal))
        .map(|a| a.into_iter().collect::<Result<Vec<_>>>());
    let [water_noise, land_noise, cloud_noise, shadow_noise] = material_noise;
    let (water_noise, land_noise, cloud_noise, shadow_noise) =
        (water_noise?, land_noise?, cloud_noise?, shadow_noise?);

    let mut bands: Vec<Vec<f64>> = (0..5).map(|_| Vec::with_capacity(w * h)).collect();
    for m in material.iter() {
        let tau = turbidity.sample(&mut rng);
        let veg = cover.sample(&mut rng);
        for (b, band) in bands.iter_mut().enumerate() {
            let (base, jitter) = match m {
                Material::Water => (
                    (1.0 - tau) * p.water.mean[b] + tau * p.turbid_water.mean[b],
                    &water_noise[b],
                ),
                Material::Land => (
                    veg * p.vegetation.mean[b] + (1.0 - veg) * p.soil.mean[b],
                    &land_noise[b],
                ),
                Material::Cloud => (p.cloud.mean[b], &cloud_noise[b]),
                Material::Shadow => (p.shadow.mean[b], &shadow_noise[b]),
            };
            let v = base + jitter.sample(&mut rng) + noise.sample(&mut rng);
            band.push(v.max(1.0));
        }
    }

    let raster = MultiBandRaster::new(
        MultiBandRaster::PIPELINE_BANDS
            .iter()
            .zip(bands)
            .map(|(name, values)| {
                Ok(Band {
                    name: name.to_string(),
                    values: Grid::from_vec(w, h, values)?,
                })
            })
            .collect::<Result<Vec<_>>>()?,
    )?;

    Ok(Scene {
        raster,
        truth,
        geometry: SceneGeometry {
            river: spec.river.clone(),
            lake: spec.lake,
            streams,
            clouds,
            shadows,
        },
        warnings,
    })
}

pub fn write_truth(truth: &Grid<Truth>, path: impl AsRef<Path>) -> Result<()> {
    write_pgm(path, &truth.map(|t| t.gray()))
}

pub fn read_truth(path: impl AsRef<Path>) -> Result<Grid<Truth>> {
    let img = read_pgm(path)?;
    let data = img
        .iter()
        .map(|&g| {
            Truth::from_gray(g)
                .ok_or_else(|| Error::MalformedHeader(format!("gray level {g} is not a truth class")))
        })
        .collect::<Result<Vec<_>>>()?;
    Grid::from_vec(img.width(), img.height(), data)
}

/// Agreement between a class map and ground truth.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    /// Predicted water that is truly water. Ignorance labels do not count.
    pub precision: f64,
    /// True water predicted as water, among true water given a hard label.
    pub recall: f64,
    /// Confusers not labeled water.
    pub confuser_capture: f64,
    pub ignorance_fraction: f64,
    pub true_positives: u64,
    pub false_positives: u64,
    pub false_negatives: u64,
    pub water_as_ignorance: u64,
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

pub fn score(predicted: &ClassMap, truth: &Grid<Truth>) -> Result<Metrics> {
    let labels = predicted.labels();
    labels.check_dims(truth)?;
    let (mut tp, mut fp, mut fneg, mut water_ign) = (0u64, 0u64, 0u64, 0u64);
    let (mut confusers, mut captured, mut ignorance) = (0u64, 0u64, 0u64);
    for (&l, &t) in labels.iter().zip(truth.iter()) {
        match (l, t) {
            (ClassLabel::Water, Truth::Water) => tp += 1,
            (ClassLabel::Water, _) => fp += 1,
            (ClassLabel::NonWater, Truth::Water) => fneg += 1,
            (ClassLabel::Ignorance, Truth::Water) => water_ign += 1,
            _ => {}
        }
        if t == Truth::Confuser {
            confusers += 1;
            captured += u64::from(l != ClassLabel::Water);
        }
        ignorance += u64::from(l == ClassLabel::Ignorance);
    }
    Ok(Metrics {
        precision: ratio(tp, tp + fp),
        recall: ratio(tp, tp + fneg),
        confuser_capture: ratio(captured, confusers),
        ignorance_fraction: ratio(ignorance, labels.len() as u64),
        true_positives: tp,
        false_positives: fp,
        false_negatives: fneg,
        water_as_ignorance: water_ign,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SceneSpec {
        SceneSpec {
            width: 96,
            height: 64,
            river: RiverSpec {
                points: vec![(0.0, 20.0), (96.0, 40.0)],
                width: 8.0,
            },
            lake: None,
            n_streams: 1,
            clouds: CloudSpec {
                count: 1,
                radius: (5.0, 8.0),
                ..CloudSpec::default()
            },
            ..SceneSpec::default()
        }
    }

    #[test]
    fn generation_is_reproducible() {
        let a = generate(&small()).unwrap();
        let b = generate(&small()).unwrap();
        assert_eq!(a.raster, b.raster);
        assert_eq!(a.truth, b.truth);
        let c = generate(&SceneSpec { seed: 7, ..small() }).unwrap();
        assert_ne!(a.raster, c.raster);
    }

    #[test]
    fn noiseless_truth_is_nir_mask() {
        let mut spec = small();
        spec.clouds.count = 0;
        spec.noise_std = 0.0;
        for p in [
            &mut spec.profiles.water,
            &mut spec.profiles.turbid_water,
            &mut spec.profiles.vegetation,
            &mut spec.profiles.soil,
        ] {
            p.std = [0.0; 5];
        }
        let scene = generate(&spec).unwrap();
        let nir = scene.raster.band("nir").unwrap();
        let mid = spec.nir_midpoint();
        for (&n, &t) in nir.iter().zip(scene.truth.iter()) {
            assert_eq!(t == Truth::Water, n < mid);
        }
    }

    #[test]
    fn out_of_bounds_river_warns() {
        let mut spec = small();
        spec.river.points = vec![(-20.0, 10.0), (120.0, 50.0)];
        let scene = generate(&spec).unwrap();
        assert_eq!(scene.warnings.len(), 1);
        assert!(scene.truth.iter().any(|&t| t == Truth::Water));
    }

    #[test]
    fn invalid_specs_are_rejected() {
        let mut spec = small();
        spec.profiles.cloud.mean[4] = 10_000.0;
        assert!(generate(&spec).is_err());
        assert!(generate(&SceneSpec { width: 0, ..small() }).is_err());
        assert!(generate(&SceneSpec { stream_width: (2.0, 1.0), ..small() }).is_err());
    }

    #[test]
    fn truth_pgm_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let scene = generate(&small()).unwrap();
        let path = dir.path().join("truth.pgm");
        write_truth(&scene.truth, &path).unwrap();
        assert_eq!(read_truth(&path).unwrap(), scene.truth);
    }

    fn cm(labels: Vec<ClassLabel>) -> ClassMap {
        ClassMap::new(Grid::from_vec(labels.len(), 1, labels).unwrap(), None).unwrap()
    }

    #[test]
    fn perfect_prediction_scores_one() {
        let truth = Grid::from_vec(4, 1, vec![Truth::Water, Truth::Land, Truth::Confuser, Truth::Water]).unwrap();
        let pred = cm(truth
            .iter()
            .map(|t| match t {
                Truth::Water => ClassLabel::Water,
                _ => ClassLabel::NonWater,
            })
            .collect());
        let m = score(&pred, &truth).unwrap();
        assert_eq!((m.precision, m.recall, m.confuser_capture), (1.0, 1.0, 1.0));
        assert_eq!(m.ignorance_fraction, 0.0);
    }

    #[test]
    fn all_ignorance_scores() {
        let truth = Grid::from_vec(3, 1, vec![Truth::Water, Truth::Land, Truth::Confuser]).unwrap();
        let m = score(&cm(vec![ClassLabel::Ignorance; 3]), &truth).unwrap();
        assert_eq!((m.recall, m.confuser_capture, m.ignorance_fraction), (0.0, 1.0, 1.0));
        assert_eq!(m.water_as_ignorance, 1);
        assert!(score(&cm(vec![ClassLabel::Water; 2]), &truth).is_err());
    }
}
