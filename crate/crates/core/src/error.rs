//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by validation, geometry, scoring, pruning, and bundle I/O.
#[derive(Debug, Error)]
pub enum Error {
    /// An input failed validation. `what` names the offending field or value.
    #[error("invalid {what}: {why}")]
    Invalid { what: String, why: String },

    /// A bundle file's byte size does not match the shape declared in the manifest.
    #[error("size mismatch for {file}: expected {expected} bytes, found {actual}")]
    SizeMismatch {
        file: String,
        expected: u64,
        actual: u64,
    },

    /// The manifest declares a format version this build does not understand.
    #[error("unknown bundle format version {0}")]
    UnknownFormatVersion(u32),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("manifest parse error: {0}")]
    Manifest(#[from] serde_json::Error),
}

impl Error {
    pub fn invalid(what: impl Into<String>, why: impl Into<String>) -> Self {
        Error::Invalid {
            what: what.into(),
            why: why.into(),
        }
    }

    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
