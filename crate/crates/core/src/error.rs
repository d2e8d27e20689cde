use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum FiestaError {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("contract violation: {0}")]
    ContractViolation(String),

    #[error("malformed file {path}: {reason}")]
    Format { path: PathBuf, reason: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl FiestaError {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        FiestaError::InvalidInput(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        FiestaError::Io { path: path.into(), source }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, reason: impl Into<String>) -> Self {
        FiestaError::Format { path: path.into(), reason: reason.into() }
    }
}

pub type Result<T> = std::result::Result<T, FiestaError>;
