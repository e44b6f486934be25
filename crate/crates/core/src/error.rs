use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),

    #[error("empty database")]
    EmptyDatabase,

    #[error("invalid query: {0}")]
    InvalidQuery(String),

    #[error("duplicate query in workload: {0}")]
    DuplicateQuery(String),

    #[error("parse error at {location}: {message}")]
    Parse { location: String, message: String },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension {d} exceeds exact-solver limit {limit}; use local search")]
    DimensionTooLarge { d: usize, limit: usize },

    #[error("privacy budget admits no rounds: {0}")]
    BudgetExhausted(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn parse(location: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Parse {
            location: location.into(),
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
