use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },

    #[error("training diverged at epoch {epoch}, batch {batch}: {what} is not finite")]
    NonFinite {
        epoch: usize,
        batch: usize,
        what: &'static str,
    },

    #[error("insufficient samples: group {group} needs {needed} but only has {available}")]
    InsufficientSamples {
        group: usize,
        needed: usize,
        available: usize,
    },

    #[error("{what} digest mismatch: expected {expected}, found {found}")]
    DigestMismatch {
        what: &'static str,
        expected: String,
        found: String,
    },

    #[error("config error at `{key}`: {msg}")]
    Config { key: String, msg: String },

    #[error("experiment cell ({method}, rate {rate}, repeat {repeat}) failed: {source}")]
    Cell {
        method: String,
        rate: f64,
        repeat: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("refusing to overwrite existing file {0} (pass --force)")]
    Exists(PathBuf),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
