use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{}: row {row}: {message}", path.display())]
    ManifestRow {
        path: PathBuf,
        row: usize,
        message: String,
    },

    #[error("unknown emotion {0:?} (expected one of anger, disgust, fear, happiness, sadness, surprised)")]
    UnknownEmotion(String),

    #[error("label {0} outside 0..5")]
    LabelOutOfRange(usize),

    #[error("malformed one-hot domain code {0:?}")]
    MalformedOneHot(Vec<f64>),

    #[error("shape mismatch: expected {expected}, got {actual}")]
    ShapeMismatch { expected: String, actual: String },

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("unknown identity source {0:?}")]
    UnknownIdentitySource(String),

    #[error("identity corpus is empty")]
    EmptyCorpus,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("dataset has fewer than two emotion classes; conditioning is degenerate")]
    SingleClassDataset,

    #[error("non-finite {what} at step {step}")]
    NonFiniteLoss { step: usize, what: String },

    #[error("empty batch")]
    EmptyBatch,

    #[error("empty dataset: {0}")]
    EmptyDataset(String),

    #[error("degenerate face box {0:?}")]
    DegenerateFaceBox([usize; 4]),

    #[error("infeasible split: {0}")]
    InfeasibleSplit(String),

    #[error("generated pool exhausted: need {needed} identities, pool has {available}")]
    PoolExhausted { needed: usize, available: usize },

    #[error("held-out data overlaps training data: identities {identities:?}, paths {paths:?}")]
    Overlap {
        identities: Vec<String>,
        paths: Vec<String>,
    },

    #[error("no score for held-out set {0:?}")]
    MissingHeldout(String),

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("{}: image: {message}", path.display())]
    Image { path: PathBuf, message: String },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn shape(expected: impl ToString, actual: impl ToString) -> Self {
        Error::ShapeMismatch {
            expected: expected.to_string(),
            actual: actual.to_string(),
        }
    }
}
