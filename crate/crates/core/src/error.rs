use thiserror::Error;

/// Errors raised by the numerical routines in this crate.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument is outside the domain where the operation is defined.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    /// A matrix or design is numerically degenerate (e.g. coincident points).
    #[error("numerical degeneracy: {0}")]
    Degenerate(String),

    #[error("failed to converge: {0}")]
    Convergence(String),

    #[error("insufficient data: needed {needed} points, {available} available")]
    InsufficientData { needed: usize, available: usize },

    #[error("calibration failed: {0}")]
    Calibration(String),

    #[error("invalid split: {0}")]
    Size(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("network error: {0}")]
    Network(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
