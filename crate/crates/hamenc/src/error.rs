//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by dataset handling, the numeric core, and persistence.
#[derive(Debug, Error)]
pub enum Error {
    /// A dataset file line could not be parsed.
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    /// Inputs violate a documented precondition or invariant.
    #[error("validation error: {0}")]
    Validation(String),

    /// Tensor shapes do not agree.
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// A value that must be finite is NaN or infinite.
    #[error("non-finite value: {0}")]
    NonFinite(String),

    /// The operation is not defined for the given configuration.
    #[error("unsupported operation: {0}")]
    Unsupported(String),

    /// A model file is corrupt, truncated, or from an unknown version.
    #[error("model format error: {0}")]
    ModelFormat(String),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }
}
