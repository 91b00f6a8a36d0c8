use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// The on-disk layout does not match what was expected (missing class
    /// directories, wrong class count, unknown manifest entries).
    #[error("dataset structure: {0}")]
    Structure(String),

    /// Image payloads are unreadable or inconsistent in shape.
    #[error("dataset format: {0}")]
    Format(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("twin source `{source_tag}` has {available} samples of class {class}, {required} required")]
    InsufficientTwin {
        source_tag: String,
        class: usize,
        required: usize,
        available: usize,
    },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("non-finite value in {component}")]
    NonFinite { component: String },

    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Tensor(#[from] candle_core::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            path: path.into(),
            message: message.into(),
        }
    }

    /// True for errors caused by user-supplied configuration or inputs rather
    /// than by a failing run.
    pub fn is_config_error(&self) -> bool {
        matches!(self, Error::Config { .. })
    }
}
