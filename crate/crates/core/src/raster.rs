//! Multi-band rasters, their on-disk container, and class-map images.
//!
//! A raster named `scene` lives in two files: `scene.json`, a small header,
//! and `scene.band`, the raw little-endian `f64` payload in band-sequential,
//! row-major order. Class maps are written as binary PPM (P6) images and
//! per-class mass planes as binary PGM (P5).

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::labels::{ClassLabel, MassTriple};

/// Dense row-major 2-D grid.
#[derive(Clone, Debug, PartialEq)]
pub struct Grid<T> {
    width: usize,
    height: usize,
    data: Vec<T>,
}

impl<T> Grid<T> {
    pub fn from_vec(width: usize, height: usize, data: Vec<T>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidArgument(format!(
                "grid dimensions must be positive, got {width}x{height}"
            )));
        }
        if data.len() != width * height {
            return Err(Error::InvalidArgument(format!(
                "{}x{} grid needs {} values, got {}",
                width,
                height,
                width * height,
                data.len()
            )));
        }
        Ok(Grid {
            width,
            height,
            data,
        })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        assert!(width > 0 && height > 0, "grid dimensions must be positive");
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Grid {
            width,
            height,
            data,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn get(&self, x: usize, y: usize) -> &T {
        &self.data[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, v: T) {
        self.data[y * self.width + x] = v;
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn iter(&self) -> std::slice::Iter<'_, T> {
        self.data.iter()
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    pub fn map<U>(&self, f: impl FnMut(&T) -> U) -> Grid<U> {
        Grid {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(f).collect(),
        }
    }

    /// Errors unless `other` has the same dimensions.
    pub fn check_dims<U>(&self, other: &Grid<U>) -> Result<()> {
        if self.dims() == other.dims() {
            Ok(())
        } else {
            Err(Error::DimensionMismatch {
                expected: self.dims(),
                actual: other.dims(),
            })
        }
    }
}

/// One named spectral band.
#[derive(Clone, Debug, PartialEq)]
pub struct Band {
    pub name: String,
    pub values: Grid<f64>,
}

/// Named bands over a common grid.
#[derive(Clone, Debug, PartialEq)]
pub struct MultiBandRaster {
    width: usize,
    height: usize,
    bands: Vec<Band>,
}

impl MultiBandRaster {
    pub const PIPELINE_BANDS: [&'static str; 5] = ["blue", "green", "red", "rededge", "nir"];

    pub fn new(bands: Vec<Band>) -> Result<Self> {
        let first = bands
            .first()
            .ok_or_else(|| Error::InvalidArgument("raster needs at least one band".into()))?;
        let dims = first.values.dims();
        for (i, b) in bands.iter().enumerate() {
            if b.values.dims() != dims {
                return Err(Error::DimensionMismatch {
                    expected: dims,
                    actual: b.values.dims(),
                });
            }
            if bands[..i].iter().any(|o| o.name == b.name) {
                return Err(Error::InvalidArgument(format!(
                    "duplicate band name '{}'",
                    b.name
                )));
            }
            if let Some(index) = b.values.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFiniteValue {
                    band: b.name.clone(),
                    index,
                });
            }
        }
        Ok(MultiBandRaster {
            width: dims.0,
            height: dims.1,
            bands,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn bands(&self) -> &[Band] {
        &self.bands
    }

    pub fn band_names(&self) -> Vec<&str> {
        self.bands.iter().map(|b| b.name.as_str()).collect()
    }

    pub fn band(&self, name: &str) -> Result<&Grid<f64>> {
        self.bands
            .iter()
            .find(|b| b.name == name)
            .map(|b| &b.values)
            .ok_or_else(|| Error::MissingBand(name.to_string()))
    }
}

const ENCODING: &str = "f64le";
const LAYOUT: &str = "band-sequential";

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    width: usize,
    height: usize,
    bands: Vec<String>,
    data_file: String,
    encoding: String,
    #[serde(default = "default_layout")]
    layout: String,
}

fn default_layout() -> String {
    LAYOUT.to_string()
}

/// Header and payload paths for a raster path given with or without extension.
pub fn container_paths(path: &Path) -> (PathBuf, PathBuf) {
    let base = match path.extension().and_then(|e| e.to_str()) {
        Some("json") | Some("band") => path.with_extension(""),
        _ => path.to_path_buf(),
    };
    (base.with_extension("json"), base.with_extension("band"))
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            Error::MissingFile(path.to_path_buf())
        } else {
            Error::io(path, e)
        }
    })
}

/// Loads a raster from its header path (`.json`) or base name.
pub fn load_raster(path: impl AsRef<Path>) -> Result<MultiBandRaster> {
    let (header_path, _) = container_paths(path.as_ref());
    let text = read_file(&header_path)?;
    let header: Header = serde_json::from_slice(&text)
        .map_err(|e| Error::MalformedHeader(format!("{}: {e}", header_path.display())))?;
    if header.encoding != ENCODING {
        return Err(Error::MalformedHeader(format!(
            "unsupported encoding '{}', expected '{ENCODING}'",
            header.encoding
        )));
    }
    if header.layout != LAYOUT {
        return Err(Error::MalformedHeader(format!(
            "unsupported layout '{}', expected '{LAYOUT}'",
            header.layout
        )));
    }
    if header.width == 0 || header.height == 0 || header.bands.is_empty() {
        return Err(Error::MalformedHeader(
            "width, height and band list must be non-empty".into(),
        ));
    }
    let data_path = header_path
        .parent()
        .unwrap_or_else(|| Path::new(""))
        .join(&header.data_file);
    let payload = read_file(&data_path)?;
    let n = header.width * header.height;
    let expected = (n * header.bands.len() * 8) as u64;
    if payload.len() as u64 != expected {
        return Err(Error::PayloadSize {
            expected,
            actual: payload.len() as u64,
        });
    }
    let mut bands = Vec::with_capacity(header.bands.len());
    for (b, name) in header.bands.iter().enumerate() {
        let chunk = &payload[b * n * 8..(b + 1) * n * 8];
        let values: Vec<f64> = chunk
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
            .collect();
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteValue {
                band: name.clone(),
                index,
            });
        }
        bands.push(Band {
            name: name.clone(),
            values: Grid::from_vec(header.width, header.height, values)?,
        });
    }
    MultiBandRaster::new(bands).map_err(|e| match e {
        Error::InvalidArgument(msg) => Error::MalformedHeader(msg),
        other => other,
    })
}

/// Writes `<base>.json` and `<base>.band`.
pub fn save_raster(r: &MultiBandRaster, path: impl AsRef<Path>) -> Result<()> {
    let (header_path, data_path) = container_paths(path.as_ref());
    let header = Header {
        width: r.width,
        height: r.height,
        bands: r.bands.iter().map(|b| b.name.clone()).collect(),
        data_file: data_path
            .file_name()
            .expect("container path has a file name")
            .to_string_lossy()
            .into_owned(),
        encoding: ENCODING.into(),
        layout: LAYOUT.into(),
    };
    let mut payload = Vec::with_capacity(r.width * r.height * r.bands.len() * 8);
    for b in &r.bands {
        for v in b.values.iter() {
            payload.extend_from_slice(&v.to_le_bytes());
        }
    }
    fs::write(&data_path, payload).map_err(|e| Error::io(&data_path, e))?;
    let text = serde_json::to_string_pretty(&header)?;
    fs::write(&header_path, text + "\n").map_err(|e| Error::io(&header_path, e))
}

/// Per-pixel decisions, optionally with the fused masses behind them.
#[derive(Clone, Debug, PartialEq)]
pub struct ClassMap {
    labels: Grid<ClassLabel>,
    masses: Option<Grid<MassTriple>>,
}

impl ClassMap {
    pub fn new(labels: Grid<ClassLabel>, masses: Option<Grid<MassTriple>>) -> Result<Self> {
        if let Some(m) = &masses {
            labels.check_dims(m)?;
            if let Some(bad) = m.iter().find(|t| (t.total() - 1.0).abs() > 1e-6) {
                return Err(Error::InvalidArgument(format!(
                    "mass triple sums to {}, not 1",
                    bad.total()
                )));
            }
        }
        Ok(ClassMap { labels, masses })
    }

    pub fn width(&self) -> usize {
        self.labels.width()
    }

    pub fn height(&self) -> usize {
        self.labels.height()
    }

    pub fn labels(&self) -> &Grid<ClassLabel> {
        &self.labels
    }

    pub fn masses(&self) -> Option<&Grid<MassTriple>> {
        self.masses.as_ref()
    }

    /// Fraction of pixels carrying `label`.
    pub fn fraction(&self, label: ClassLabel) -> f64 {
        self.labels.iter().filter(|&&l| l == label).count() as f64 / self.labels.len() as f64
    }
}

pub fn label_color(l: ClassLabel) -> [u8; 3] {
    match l {
        ClassLabel::Water => [0, 0, 255],
        ClassLabel::NonWater => [0, 160, 0],
        ClassLabel::Ignorance => [255, 0, 0],
    }
}

fn color_label(rgb: [u8; 3]) -> Option<ClassLabel> {
    ClassLabel::ALL.into_iter().find(|&l| label_color(l) == rgb)
}

/// Maps a mass in `[0, 1]` to an 8-bit gray level.
pub fn mass_to_gray(m: f64) -> u8 {
    (255.0 * m.clamp(0.0, 1.0)).round() as u8
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    w.write_all(bytes)
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}

/// Writes an RGB image as binary PPM.
pub fn write_ppm(path: impl AsRef<Path>, img: &Grid<[u8; 3]>) -> Result<()> {
    let mut bytes = format!("P6\n{} {}\n255\n", img.width(), img.height()).into_bytes();
    for px in img.iter() {
        bytes.extend_from_slice(px);
    }
    write_file(path.as_ref(), &bytes)
}

/// Writes a gray image as binary PGM.
pub fn write_pgm(path: impl AsRef<Path>, img: &Grid<u8>) -> Result<()> {
    let mut bytes = format!("P5\n{} {}\n255\n", img.width(), img.height()).into_bytes();
    bytes.extend_from_slice(img.as_slice());
    write_file(path.as_ref(), &bytes)
}

/// Renders labels as blue (water), green (non-water) and red (ignorance).
pub fn render_classmap(c: &ClassMap, path: impl AsRef<Path>) -> Result<()> {
    write_ppm(path, &c.labels.map(|&l| label_color(l)))
}

/// Writes one mass channel as a gray image, 0 → black and 1 → white.
pub fn render_mass_channel(
    c: &ClassMap,
    channel: ClassLabel,
    path: impl AsRef<Path>,
) -> Result<()> {
    let masses = c
        .masses
        .as_ref()
        .ok_or_else(|| Error::InvalidArgument("class map carries no masses".into()))?;
    let img = masses.map(|t| {
        mass_to_gray(match channel {
            ClassLabel::Water => t.water,
            ClassLabel::NonWater => t.non_water,
            ClassLabel::Ignorance => t.ignorance,
        })
    });
    write_pgm(path, &img)
}

fn parse_netpbm<'a>(bytes: &'a [u8], magic: &str) -> Result<(usize, usize, &'a [u8])> {
    let mut pos = 0;
    let mut tokens = Vec::with_capacity(4);
    while tokens.len() < 4 {
        while pos < bytes.len() && (bytes[pos].is_ascii_whitespace() || bytes[pos] == b'#') {
            if bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
            } else {
                pos += 1;
            }
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(Error::MalformedHeader("truncated image header".into()));
        }
        tokens.push(String::from_utf8_lossy(&bytes[start..pos]).into_owned());
    }
    pos += 1;
    if tokens[0] != magic {
        return Err(Error::MalformedHeader(format!(
            "expected {magic} image, found '{}'",
            tokens[0]
        )));
    }
    let num = |s: &str| {
        s.parse::<usize>()
            .map_err(|_| Error::MalformedHeader(format!("bad image header field '{s}'")))
    };
    let (w, h, maxval) = (num(&tokens[1])?, num(&tokens[2])?, num(&tokens[3])?);
    if maxval != 255 || w == 0 || h == 0 {
        return Err(Error::MalformedHeader(
            "only non-empty 8-bit images are supported".into(),
        ));
    }
    Ok((w, h, bytes.get(pos..).unwrap_or(&[])))
}

/// Reads a binary PGM written by [`write_pgm`].
pub fn read_pgm(path: impl AsRef<Path>) -> Result<Grid<u8>> {
    let bytes = read_file(path.as_ref())?;
    let (w, h, data) = parse_netpbm(&bytes, "P5")?;
    if data.len() != w * h {
        return Err(Error::PayloadSize {
            expected: (w * h) as u64,
            actual: data.len() as u64,
        });
    }
    Grid::from_vec(w, h, data.to_vec())
}

/// Reads a class map image produced by [`render_classmap`].
pub fn read_classmap_ppm(path: impl AsRef<Path>) -> Result<ClassMap> {
    let bytes = read_file(path.as_ref())?;
    let (w, h, data) = parse_netpbm(&bytes, "P6")?;
    if data.len() != w * h * 3 {
        return Err(Error::PayloadSize {
            expected: (w * h * 3) as u64,
            actual: data.len() as u64,
        });
    }
    let labels = data
        .chunks_exact(3)
        .map(|c| {
            color_label([c[0], c[1], c[2]]).ok_or_else(|| {
                Error::MalformedHeader(format!("pixel color {c:?} is not a class color"))
            })
        })
        .collect::<Result<Vec<_>>>()?;
    ClassMap::new(Grid::from_vec(w, h, labels)?, None)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn raster(w: usize, h: usize, names: &[&str]) -> MultiBandRaster {
        let bands = names
            .iter()
            .enumerate()
            .map(|(b, n)| Band {
                name: n.to_string(),
                values: Grid::from_fn(w, h, |x, y| (b * 1000 + y * w + x) as f64 + 0.25),
            })
            .collect();
        MultiBandRaster::new(bands).unwrap()
    }

    #[test]
    fn round_trip_small() {
        let dir = tempfile::tempdir().unwrap();
        let r = raster(2, 2, &MultiBandRaster::PIPELINE_BANDS);
        save_raster(&r, dir.path().join("s")).unwrap();
        assert_eq!(load_raster(dir.path().join("s.json")).unwrap(), r);
        assert_eq!(load_raster(dir.path().join("s")).unwrap(), r);
    }

    #[test]
    fn one_by_one_is_valid() {
        let dir = tempfile::tempdir().unwrap();
        let r = raster(1, 1, &["nir"]);
        save_raster(&r, dir.path().join("p.json")).unwrap();
        assert_eq!(load_raster(dir.path().join("p.json")).unwrap(), r);
    }

    #[test]
    fn empty_band_list_rejected() {
        assert!(MultiBandRaster::new(vec![]).is_err());
    }

    #[test]
    fn construction_checks() {
        let a = Band {
            name: "a".into(),
            values: Grid::from_fn(2, 2, |_, _| 1.0),
        };
        let b = Band {
            name: "b".into(),
            values: Grid::from_fn(3, 2, |_, _| 1.0),
        };
        assert!(matches!(
            MultiBandRaster::new(vec![a.clone(), b]),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(MultiBandRaster::new(vec![a.clone(), a.clone()]).is_err());
        let nan = Band {
            name: "c".into(),
            values: Grid::from_fn(2, 2, |x, _| if x == 1 { f64::NAN } else { 0.0 }),
        };
        assert!(matches!(
            MultiBandRaster::new(vec![nan]),
            Err(Error::NonFiniteValue { index: 1, .. })
        ));
        assert!(matches!(
            raster(2, 2, &["nir"]).band("red"),
            Err(Error::MissingBand(_))
        ));
    }

    #[test]
    fn classmap_requires_normalized_masses() {
        let labels = Grid::from_fn(1, 1, |_, _| ClassLabel::Water);
        let bad = Grid::from_fn(1, 1, |_, _| MassTriple::new(0.5, 0.0, 0.4));
        assert!(ClassMap::new(labels.clone(), Some(bad)).is_err());
        let wrong_dims = Grid::from_fn(2, 1, |_, _| MassTriple::new(1.0, 0.0, 0.0));
        assert!(ClassMap::new(labels, Some(wrong_dims)).is_err());
    }

    #[test]
    fn ppm_checkerboard() {
        let dir = tempfile::tempdir().unwrap();
        let labels = Grid::from_fn(3, 2, |x, y| {
            if (x + y) % 2 == 0 {
                ClassLabel::Water
            } else {
                ClassLabel::Ignorance
            }
        });
        let cm = ClassMap::new(labels, None).unwrap();
        let path = dir.path().join("c.ppm");
        render_classmap(&cm, &path).unwrap();
        let bytes = fs::read(&path).unwrap();
        let header = b"P6\n3 2\n255\n";
        assert_eq!(&bytes[..header.len()], header);
        let px = &bytes[header.len()..];
        assert_eq!(px.len(), 18);
        assert_eq!(&px[0..3], &[0, 0, 255]);
        assert_eq!(&px[3..6], &[255, 0, 0]);
        assert_eq!(&px[9..12], &[255, 0, 0]);
        assert_eq!(read_classmap_ppm(&path).unwrap(), cm);
    }

    #[test]
    fn all_water_is_all_blue() {
        let dir = tempfile::tempdir().unwrap();
        let cm = ClassMap::new(Grid::from_fn(4, 4, |_, _| ClassLabel::Water), None).unwrap();
        let path = dir.path().join("w.ppm");
        render_classmap(&cm, &path).unwrap();
        let bytes = fs::read(&path).unwrap();
        assert!(bytes[bytes.len() - 48..].chunks(3).all(|c| c == [0, 0, 255]));
    }

    #[test]
    fn mass_gray_endpoints() {
        assert_eq!(mass_to_gray(0.0), 0);
        assert_eq!(mass_to_gray(1.0), 255);
        assert_eq!(mass_to_gray(0.5), 128);

        let dir = tempfile::tempdir().unwrap();
        let labels = Grid::from_fn(2, 1, |_, _| ClassLabel::Water);
        let masses = Grid::from_vec(
            2,
            1,
            vec![MassTriple::new(1.0, 0.0, 0.0), MassTriple::new(0.0, 0.0, 1.0)],
        )
        .unwrap();
        let cm = ClassMap::new(labels, Some(masses)).unwrap();
        let path = dir.path().join("m.pgm");
        render_mass_channel(&cm, ClassLabel::Water, &path).unwrap();
        assert_eq!(read_pgm(&path).unwrap().as_slice(), &[255, 0]);
    }

    #[test]
    fn netpbm_header_tolerates_comments() {
        let bytes = b"P5\n# made by hand\n2 1\n255\n\x01\x02";
        let (w, h, data) = parse_netpbm(bytes, "P5").unwrap();
        assert_eq!((w, h, data), (2, 1, &[1u8, 2][..]));
        assert!(parse_netpbm(bytes, "P6").is_err());
    }
}
