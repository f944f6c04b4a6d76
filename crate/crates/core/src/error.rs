use thiserror::Error;

/// Errors produced by model construction, filtering, estimation and I/O.
#[derive(Debug, Error)]
pub enum Error {
    #[error("parameter out of domain: {0}")]
    ParameterDomain(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("empty input series")]
    EmptyInput,

    #[error("insufficient data: need more than {needed} observations, got {found}")]
    InsufficientData { needed: usize, found: usize },

    #[error("estimation failed: {0}")]
    EstimationFailed(String),

    #[error("invalid observation at index {index}: {reason}")]
    InvalidObservation { index: usize, reason: String },

    #[error("parse error at row {row}: {message}")]
    Parse { row: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::ParameterDomain(msg.into())
}
