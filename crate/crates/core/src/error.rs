use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("invalid architecture: {0}")]
    InvalidArch(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("dataset must contain at least one sample")]
    EmptyDataset,

    #[error("numeric Hessian needs {params} parameters but the cap is {cap}")]
    HessianCapExceeded { params: usize, cap: usize },

    #[error("weight cap beta must be positive and finite, got {0}")]
    InvalidBeta(f64),

    #[error("method {method} does not apply to {arch}")]
    MethodMismatch { method: String, arch: String },

    #[error("power iteration did not converge after {iterations} iterations (last estimate {last_estimate})")]
    NoConvergence { iterations: usize, last_estimate: f64 },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv: {0}")]
    Csv(String),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures caused by bad input or configuration rather than
    /// by the numerics.
    pub fn is_usage(&self) -> bool {
        !matches!(self, Error::NoConvergence { .. } | Error::NonFinite(_))
    }
}
