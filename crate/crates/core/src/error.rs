use std::path::PathBuf;

use thiserror::Error;

/// Errors shared across the crate.
///
/// Validation-type failures (bad configuration, out-of-vocabulary values,
/// malformed input documents) are kept apart from I/O so that callers such
/// as the CLI can map them to distinct exit codes.
#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error in `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("ingestion error at line {line}, column {column}: {message}")]
    Ingest {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("simulation error: {0}")]
    Simulation(String),

    #[error("consistency error: {0}")]
    Consistency(String),

    #[error("input error: {0}")]
    Input(String),

    #[error("record {index}: {message}")]
    Record { index: usize, message: String },

    #[error(transparent)]
    Frame(#[from] crate::dst::FrameError),

    #[error("I/O error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by the caller's input rather than the environment.
    pub fn is_validation(&self) -> bool {
        !matches!(self, Error::Io { .. })
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
