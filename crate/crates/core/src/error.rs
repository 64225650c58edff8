use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error in {path} line {line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("ingestion error in {path}: {message}")]
    Ingest { path: PathBuf, message: String },

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("usage error: {0}")]
    Usage(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid skeleton graph: {0}")]
    Graph(String),

    #[error("no anchors in batch")]
    NoAnchors,

    #[error("zero-norm embedding at index {0}: cosine similarity undefined")]
    ZeroNorm(usize),

    #[error("insufficient correct samples for reference: {0}")]
    InsufficientCorrect(String),

    #[error("unknown exercise type `{0}`")]
    UnknownExerciseType(String),

    #[error("undefined metric: {0}")]
    UndefinedMetric(String),

    #[error("unsupported checkpoint version {found} (expected {expected})")]
    UnsupportedVersion { found: u32, expected: u32 },

    #[error("corrupt checkpoint: {0}")]
    Corrupt(String),

    #[error("non-finite loss at epoch {epoch}, batch {batch}: {detail}")]
    NonFiniteLoss {
        epoch: usize,
        batch: usize,
        detail: String,
    },

    #[error("regression target required: dataset `{0}` carries binary assessments")]
    RegressionTargetRequired(String),

    #[error("skeleton graph mismatch: {0}")]
    GraphMismatch(String),

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

    /// Short machine-readable tag for the error variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Io { .. } => "io",
            Error::Parse { .. } => "parse",
            Error::Ingest { .. } => "ingest",
            Error::Argument(_) => "argument",
            Error::Usage(_) => "usage",
            Error::Shape(_) => "shape",
            Error::Graph(_) => "graph",
            Error::NoAnchors => "no_anchors",
            Error::ZeroNorm(_) => "zero_norm",
            Error::InsufficientCorrect(_) => "insufficient_correct",
            Error::UnknownExerciseType(_) => "unknown_exercise_type",
            Error::UndefinedMetric(_) => "undefined_metric",
            Error::UnsupportedVersion { .. } => "unsupported_version",
            Error::Corrupt(_) => "corrupt",
            Error::NonFiniteLoss { .. } => "non_finite_loss",
            Error::RegressionTargetRequired(_) => "regression_target_required",
            Error::GraphMismatch(_) => "graph_mismatch",
            Error::Json(_) => "json",
        }
    }
}
