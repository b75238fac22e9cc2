use thiserror::Error;

/// Error type shared by every module in the crate.
#[derive(Debug, Error)]
pub enum Error {
    /// A feature index points outside the model/dataset dimension.
    #[error("feature index {index} out of range for dimension {dim}")]
    DimensionMismatch { index: usize, dim: usize },

    /// A configuration parameter violates its documented range.
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// A constructed example or dataset violates a structural invariant.
    #[error("invalid data: {0}")]
    InvalidData(String),

    /// A numeric input was NaN or infinite where a finite value is required.
    #[error("non-finite input: {0}")]
    NonFinite(String),

    /// Sparse-text parsing failed; `line` is 1-based.
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("dataset contains a single class")]
    SingleClass,

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

/// Validate that a parameter is finite and strictly positive.
pub(crate) fn ensure_positive(value: f64, what: &str) -> Result<f64> {
    if value.is_finite() && value > 0.0 {
        Ok(value)
    } else {
        Err(Error::InvalidConfig(format!(
            "{what} must be positive and finite, got {value}"
        )))
    }
}

/// Validate that a parameter is finite and non-negative.
pub(crate) fn ensure_non_negative(value: f64, what: &str) -> Result<f64> {
    if value.is_finite() && value >= 0.0 {
        Ok(value)
    } else {
        Err(Error::InvalidConfig(format!(
            "{what} must be non-negative and finite, got {value}"
        )))
    }
}
