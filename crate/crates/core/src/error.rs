use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: no note spectra found")]
    EmptyDirectory { path: PathBuf },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{path}: schema error at {pointer}: {message}")]
    Schema {
        path: PathBuf,
        pointer: String,
        message: String,
    },

    #[error("unknown note name {0:?}")]
    UnknownNote(String),

    #[error("validation error: {0}")]
    Validation(String),

    #[error("truncation error: {0}")]
    Truncation(String),

    #[error("index out of range: {0}")]
    OutOfRange(String),

    #[error("rank oracle refused: {rows}x{cols} matrix exceeds {limit} entries")]
    SizeGuard {
        rows: usize,
        cols: usize,
        limit: usize,
    },

    #[error("{0}")]
    Apply(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
