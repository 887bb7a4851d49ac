use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("coordinate {value} outside [0, {extent}] on the {axis} axis")]
    OutOfRange {
        axis: &'static str,
        value: f64,
        extent: f64,
    },

    #[error("invalid box: {0}")]
    InvalidBox(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("need at least {needed} correspondences, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("degenerate point configuration: {0}")]
    Degenerate(String),

    #[error("point maps to infinity (w = {w:e})")]
    PointAtInfinity { w: f64 },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("forward cache does not match the current network state: {0}")]
    StaleCache(String),

    #[error("non-finite gradient in layer {layer} {tensor}[{index}]")]
    NonFiniteGradient {
        layer: usize,
        tensor: &'static str,
        index: usize,
    },

    #[error("training diverged at epoch {epoch} (non-finite loss)")]
    Diverged {
        epoch: usize,
        history: Vec<crate::neuralnet::EpochLoss>,
    },

    #[error("missing appearance feature for record {0}")]
    MissingFeature(String),

    #[error("{0}")]
    Model(String),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    IoRaw(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
