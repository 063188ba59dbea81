use thiserror::Error;

use crate::norms::Norm;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A dual point left the domain of some loss conjugate.
    #[error("dual variable of example {example} is outside the conjugate domain")]
    Domain { example: usize },

    #[error("unsupported norm pair: dual {dual:?}, weight dual {weight_dual:?}")]
    UnsupportedNormPair { dual: Norm, weight_dual: Norm },

    #[error("option {option} is not available here: {reason}")]
    UnsupportedOption { option: String, reason: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("dimension error: {0}")]
    Dimension(String),

    /// The dual objective went down between checkpoints by more than rounding allows.
    #[error("dual objective decreased from {previous} to {current} at iteration {iteration}")]
    Trace {
        iteration: u64,
        previous: f64,
        current: f64,
    },

    #[error("no convergence after {iterations} iterations (last gap {gap})")]
    NonConvergence { iterations: usize, gap: f64 },

    #[error("parse error on line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
