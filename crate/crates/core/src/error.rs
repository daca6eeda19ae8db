use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("parameter out of range: {0}")]
    OutOfRange(String),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("{0} part of the network is frozen")]
    FrozenPart(&'static str),

    #[error("invalid dataset: {0}")]
    InvalidData(String),

    #[error("matrix is not positive definite: {0}")]
    NotPositiveDefinite(&'static str),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },

    #[error("configuration error: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, message: impl ToString) -> Self {
        Error::Format {
            path: path.into(),
            message: message.to_string(),
        }
    }

    /// Process exit code associated with this error class.
    ///
    /// 1 usage, 2 data, 3 numerical failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::OutOfRange(_) => 1,
            Error::NonFinite(_) | Error::NotPositiveDefinite(_) => 3,
            Error::DimensionMismatch { .. }
            | Error::FrozenPart(_)
            | Error::InvalidData(_)
            | Error::Io { .. }
            | Error::Format { .. } => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
