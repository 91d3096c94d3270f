use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;

/// Evidential surface-water detection for multi-spectral rasters.
#[derive(Debug, Parser)]
#[command(name = "dswater", version, about)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the full pipeline and write the class map, mass maps and report.
    Detect(Box<DetectArgs>),
    /// Find the NIR threshold and export the histogram and fitted polynomial.
    Threshold(ThresholdArgs),
    /// Compute NDVI, NDWI and RE_NDWI planes.
    Indices(IndicesArgs),
    /// Generate a synthetic scene with ground truth.
    Synth(SynthArgs),
    /// Render a false-color preview of a raster.
    Render(RenderArgs),
    /// Score a class map against a ground-truth mask.
    Score(ScoreArgs),
}

fn unit_interval(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|_| format!("'{s}' is not a number"))?;
    if (0.0..=1.0).contains(&v) {
        Ok(v)
    } else {
        Err(format!("{v} is out of range, must lie in [0, 1]"))
    }
}

fn open_unit_interval(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|_| format!("'{s}' is not a number"))?;
    if (0.0..1.0).contains(&v) {
        Ok(v)
    } else {
        Err(format!("{v} is out of range, must lie in [0, 1)"))
    }
}

fn positive_f64(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|_| format!("'{s}' is not a number"))?;
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(format!("{v} is out of range, must be positive"))
    }
}

fn alpha_value(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|_| format!("'{s}' is not a number"))?;
    if v > 0.0 && v <= 1.0 {
        Ok(v)
    } else {
        Err(format!("{v} is out of range, must lie in (0, 1]"))
    }
}

fn odd_window(s: &str) -> Result<usize, String> {
    let v: usize = s.parse().map_err(|_| format!("'{s}' is not a positive integer"))?;
    if v % 2 == 1 {
        Ok(v)
    } else {
        Err(format!("{v} is out of range, must be a positive odd integer"))
    }
}

fn nbins_value(s: &str) -> Result<usize, String> {
    let v: usize = s.parse().map_err(|_| format!("'{s}' is not a positive integer"))?;
    if v >= 8 {
        Ok(v)
    } else {
        Err(format!("{v} is out of range, must be at least 8"))
    }
}

fn positive_usize(s: &str) -> Result<usize, String> {
    let v: usize = s.parse().map_err(|_| format!("'{s}' is not a positive integer"))?;
    if v > 0 {
        Ok(v)
    } else {
        Err("must be at least 1".into())
    }
}

#[derive(Debug, Args)]
pub struct DetectArgs {
    /// Input raster (header `.json` or base name).
    #[arg(long)]
    pub input: PathBuf,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Pipeline configuration file (JSON); flags below override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Seed for sampling and training [default: 42].
    #[arg(long)]
    pub seed: Option<u64>,
    /// NIR histogram bins, at least 8 [default: 256].
    #[arg(long, value_parser = nbins_value)]
    pub nbins: Option<usize>,
    /// Odd side of the neighborhood window for the spatial coefficient [default: 3].
    #[arg(long, value_parser = odd_window)]
    pub window: Option<usize>,
    /// Spectral mass a pixel needs to be harvested for training, in [0, 1) [default: 0.7].
    #[arg(long, value_parser = open_unit_interval)]
    pub harvest_threshold: Option<f64>,
    /// Training pixels drawn per class [default: 5000].
    #[arg(long, value_parser = positive_usize)]
    pub per_class: Option<usize>,
    /// Eligible pixels required per class [default: 50].
    #[arg(long, value_parser = positive_usize)]
    pub min_samples: Option<usize>,
    /// Decision exponent r, in [0, 1] [default: 0.1].
    #[arg(long, value_parser = unit_interval)]
    pub r: Option<f64>,
    /// Decision scale k_d, positive [default: 1].
    #[arg(long, value_parser = positive_f64)]
    pub k_d: Option<f64>,
    /// Decision weight of {water}, positive [default: 1].
    #[arg(long, value_parser = positive_f64)]
    pub lambda_water: Option<f64>,
    /// Decision weight of {non-water}, positive [default: 1].
    #[arg(long, value_parser = positive_f64)]
    pub lambda_nonwater: Option<f64>,
    /// Decision weight of ignorance, positive [default: 1].
    #[arg(long, value_parser = positive_f64)]
    pub lambda_ignorance: Option<f64>,
    /// Classifier training epochs [default: 50].
    #[arg(long, value_parser = positive_usize)]
    pub epochs: Option<usize>,
    /// Classifier regularization, positive [default: 0.001].
    #[arg(long, value_parser = positive_f64)]
    pub reg: Option<f64>,
    /// Supervised discount coefficient, in (0, 1] [default: 0.95].
    #[arg(long, value_parser = alpha_value)]
    pub alpha: Option<f64>,
}

#[derive(Debug, Args)]
pub struct ThresholdArgs {
    /// Input raster (header `.json` or base name).
    #[arg(long)]
    pub input: PathBuf,
    /// Band to threshold.
    #[arg(long, default_value = "nir")]
    pub band: String,
    /// Histogram bins, at least 8.
    #[arg(long, default_value_t = 256, value_parser = nbins_value)]
    pub nbins: usize,
    /// Directory for `histogram.csv` and `polynomial.csv`; nothing is written when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct IndicesArgs {
    /// Input raster (header `.json` or base name).
    #[arg(long)]
    pub input: PathBuf,
    /// Output directory for the PGM previews and the `indices` raster.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Scene specification (JSON); built-in defaults when omitted.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    /// Output raster base name; `truth.pgm` is written next to it.
    #[arg(long)]
    pub out: PathBuf,
    /// Generator seed, overriding the spec [default: 42].
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct RenderArgs {
    /// Input raster (header `.json` or base name).
    #[arg(long)]
    pub input: PathBuf,
    /// Output PPM image.
    #[arg(long)]
    pub out: PathBuf,
    /// Bands mapped to red, green and blue, comma separated.
    #[arg(long, default_value = "nir,red,green", value_delimiter = ',', num_args = 3)]
    pub bands: Vec<String>,
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    /// Class map image written by `detect`.
    #[arg(long)]
    pub classmap: PathBuf,
    /// Ground-truth mask written by `synth`.
    #[arg(long)]
    pub truth: PathBuf,
}

/// Why a command failed, and the matching exit status.
#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Data(String),
}

impl Failure {
    fn exit_code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Data(_) => 2,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Data(m) => m,
        }
    }
}

/// Wraps a library error with the stage it happened in.
pub fn data(stage: &'static str) -> impl Fn(dswater::Error) -> Failure {
    move |e| match e {
        dswater::Error::Stage { .. } => Failure::Data(e.to_string()),
        other => Failure::Data(format!("{stage}: {other}")),
    }
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path, stage: &'static str) -> Result<T, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::Data(format!("{stage}: cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| Failure::Data(format!("{stage}: invalid {}: {e}", path.display())))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message().replace('\n', " "));
            ExitCode::from(f.exit_code())
        }
    }
}
