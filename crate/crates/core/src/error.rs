use thiserror::Error;

/// Everything that can go wrong when building channels, families or reports.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("channel is not completely positive: det Y = {det_y:.6e} < (det X - 1)^2 = {bound:.6e}")]
    NotCompletelyPositive { det_y: f64, bound: f64 },

    #[error("matrix is not a physical covariance matrix: {0}")]
    NotPhysical(String),

    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("malformed input: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
