use std::path::PathBuf;

use thiserror::Error;

/// Errors raised across the simulation and analysis pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter space: {0}")]
    InvalidSpace(String),

    #[error("invalid clip for {dim}: [{lower}, {upper}] is not inside [{orig_lower}, {orig_upper}]")]
    InvalidClip {
        dim: String,
        lower: f64,
        upper: f64,
        orig_lower: f64,
        orig_upper: f64,
    },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("design has no rows")]
    EmptyDesign,

    #[error("schema error in {path}: {message}")]
    Schema { path: PathBuf, message: String },

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("degenerate design matrix: {0}")]
    DegenerateDesign(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("CSV error on {path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },

    #[error("JSON error on {path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

impl Error {
    pub(crate) fn schema(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Schema {
            path: path.into(),
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures caused by malformed inputs rather than numerics.
    pub fn is_data_error(&self) -> bool {
        !matches!(self, Error::Numeric(_) | Error::DegenerateDesign(_))
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
