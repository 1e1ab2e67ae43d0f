use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("design matrix is rank deficient (rank {rank} of {cols} columns)")]
    SingularDesign { rank: usize, cols: usize },

    #[error("coefficient index {index} out of range 1..={len}")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("variance must be positive and finite, got {0}")]
    InvalidVariance(f64),

    #[error("test direction is degenerate")]
    InvalidDirection,

    #[error("trace entry {entry} violated at z = {z} (excess {excess:e})")]
    TraceMismatch { entry: usize, z: f64, excess: f64 },

    #[error("truncation set carries no probability mass")]
    ZeroTruncationMass,

    #[error("the search generated no features")]
    EmptyGeneration,

    #[error("covariance matrix is not symmetric positive definite")]
    NotPositiveDefinite,

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid expression {text:?}: {reason}")]
    Parse { text: String, reason: String },

    #[error("ingest error at row {row}, column {column:?}: {message}")]
    Ingest {
        row: usize,
        column: String,
        message: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
