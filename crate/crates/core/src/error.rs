use std::io;
use std::path::PathBuf;

use thiserror::Error;

/// Errors raised while building, loading or querying a network.
#[derive(Debug, Error)]
pub enum Error {
    #[error("validation: {0}")]
    Validation(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("missing required feed file {}", .0.display())]
    MissingFile(PathBuf),

    #[error("{file}:{line}: {message}")]
    Record {
        file: String,
        line: u64,
        message: String,
    },

    #[error("network file: {0}")]
    Format(String),

    #[error("unknown station {0}")]
    UnknownStation(String),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Validation(msg.into()))
}
