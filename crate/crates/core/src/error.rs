use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("frame mismatch: mass functions are defined over different frames")]
    FrameMismatch,

    #[error("undefined distribution: all mass is on the empty set")]
    UndefinedDistribution,

    #[error("file not found: {}", .0.display())]
    MissingFile(PathBuf),

    #[error("i/o error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed header: {0}")]
    MalformedHeader(String),

    #[error("payload size mismatch: header implies {expected} bytes, file has {actual}")]
    PayloadSize { expected: u64, actual: u64 },

    #[error("dimension mismatch: expected {expected:?}, got {actual:?}")]
    DimensionMismatch {
        expected: (usize, usize),
        actual: (usize, usize),
    },

    #[error("non-finite value in band '{band}' at pixel {index}")]
    NonFiniteValue { band: String, index: usize },

    #[error("missing band '{0}'")]
    MissingBand(String),

    #[error("degenerate-band: band is constant ({0}), no histogram can be built")]
    DegenerateBand(f64),

    #[error("unimodal-histogram: found {found} significant peak(s), need two")]
    UnimodalHistogram { found: usize },

    #[error("insufficient-separation: only {points} histogram bins between the peaks, need 7")]
    InsufficientSeparation { points: usize },

    #[error(
        "insufficient-training-data: {water} water and {non_water} non-water eligible pixels, need {required} per class"
    )]
    InsufficientTrainingData {
        water: usize,
        non_water: usize,
        required: usize,
    },

    #[error("untrainable: {0}")]
    Untrainable(String),

    #[error("degenerate-centers: water and non-water class centers coincide")]
    DegenerateCenters,

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Innermost error, skipping any pipeline-stage wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } => source.root(),
            other => other,
        }
    }
}

pub(crate) trait StageContext<T> {
    fn stage(self, stage: &'static str) -> Result<T>;
}

impl<T> StageContext<T> for Result<T> {
    fn stage(self, stage: &'static str) -> Result<T> {
        self.map_err(|e| Error::Stage {
            stage,
            source: Box::new(e),
        })
    }
}
