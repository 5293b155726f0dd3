use std::path::PathBuf;

use thiserror::Error;

/// Every fallible operation in the crate returns this error.
#[derive(Debug, Error)]
pub enum Error {
    /// A physical parameter is outside its admissible domain.
    #[error("parameter `{name}` out of domain: {reason}")]
    Domain { name: &'static str, reason: String },

    /// Grids, scenarios and experiment settings that do not fit together.
    #[error("configuration error: {0}")]
    Config(String),

    /// Sampling too coarse for the quantity being computed.
    #[error("resolution-sampling error: pitch {pitch:.4e} m exceeds limit {limit:.4e} m")]
    Sampling { pitch: f64, limit: f64 },

    /// Two grids that must be congruent are not.
    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    /// An upstream invariant was broken (e.g. negative intensity reaching the detector).
    #[error("internal consistency error: {0}")]
    Internal(String),

    /// An empirical estimator could not produce a value.
    #[error("estimation failed: {0}")]
    Estimation(String),

    /// Requested computation exceeds the configured resource budget.
    #[error("resource budget exceeded: {0}")]
    Budget(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("malformed file {path}: {reason}")]
    Format { path: PathBuf, reason: String },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn domain(name: &'static str, reason: impl Into<String>) -> Self {
        Error::Domain {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

/// A non-fatal condition attached to a result (guard violations, flags).
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct Warning {
    pub code: String,
    pub message: String,
}

impl Warning {
    pub fn new(code: impl Into<String>, message: impl Into<String>) -> Self {
        Warning {
            code: code.into(),
            message: message.into(),
        }
    }
}
