use thiserror::Error;

use crate::circuit::ParameterSet;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Input that is syntactically valid but carries no usable information
    /// (e.g. an all-zero fidelity vector).
    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    /// Optimization produced a non-finite loss. Carries the last parameter
    /// set that still evaluated to a finite value, when one exists.
    #[error("training failed: {message}")]
    TrainingFailure {
        message: String,
        last_theta: Option<Box<ParameterSet>>,
    },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
