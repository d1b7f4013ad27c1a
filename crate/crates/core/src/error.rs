use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the regression solvers and the data layer.
#[derive(Debug, Error)]
pub enum QmrError {
    #[error("shape mismatch: expected {expected}, got {found}")]
    ShapeMismatch { expected: String, found: String },

    #[error("ridge system matrix is not positive definite (regularizer {regularizer})")]
    FactorizationFailure { regularizer: f64 },

    #[error("non-finite value in {what} at iteration {iteration}")]
    NonFinite { what: &'static str, iteration: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("unsupported image format for {path}: {reason}")]
    UnsupportedFormat { path: PathBuf, reason: String },

    #[error("malformed manifest {path} line {line}: {reason}")]
    Manifest {
        path: PathBuf,
        line: usize,
        reason: String,
    },
}

pub type Result<T> = std::result::Result<T, QmrError>;

pub(crate) fn shape_mismatch(expected: impl ToString, found: impl ToString) -> QmrError {
    QmrError::ShapeMismatch {
        expected: expected.to_string(),
        found: found.to_string(),
    }
}
