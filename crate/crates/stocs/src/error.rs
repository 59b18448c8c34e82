use std::io;
use std::path::{Path, PathBuf};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("cannot write {path}: {source}")]
    Write {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{path}: {reason}")]
    Malformed { path: PathBuf, reason: String },
    #[error("{path}: not a {expected} file of a supported version")]
    FormatVersionMismatch { path: PathBuf, expected: &'static str },
    #[error(transparent)]
    Core(#[from] stocs_core::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn read(path: &Path, source: io::Error) -> Self {
        Error::Read {
            path: path.to_path_buf(),
            source,
        }
    }

    pub(crate) fn write(path: &Path, source: io::Error) -> Self {
        Error::Write {
            path: path.to_path_buf(),
            source,
        }
    }

    pub(crate) fn malformed(path: &Path, reason: impl Into<String>) -> Self {
        Error::Malformed {
            path: path.to_path_buf(),
            reason: reason.into(),
        }
    }

    pub(crate) fn truncated(path: &Path) -> Self {
        Self::read(path, io::Error::new(io::ErrorKind::UnexpectedEof, "file is truncated"))
    }
}

pub(crate) fn read_file(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| Error::read(path, e))
}

pub(crate) fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes).map_err(|e| Error::write(path, e))
}

impl Error {
    /// 2 for unusable input, 3 for output failures, 4 when estimation found
    /// nothing.
    pub fn exit_code(&self) -> u8 {
        match self {
            Error::Write { .. } => 3,
            Error::Core(stocs_core::Error::InsufficientSupport | stocs_core::Error::NoHypothesisFound) => 4,
            _ => 2,
        }
    }
}
