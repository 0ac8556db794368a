use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// Both noise terms are zero, so the probit collapses to a step function.
    #[error("deterministic limit: both noise terms are zero")]
    DeterministicLimit,

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("correlation matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("record {index}: {reason}")]
    Data { index: usize, reason: String },

    #[error("non-finite gradient in dimension {dim} ({name})")]
    NonFiniteGradient { dim: usize, name: String },

    #[error("non-finite log-likelihood at record {0}")]
    NonFiniteLogLik(usize),

    #[error("mismatched inputs: {0}")]
    Mismatch(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("malformed draws file: {0}")]
    DrawsFormat(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
