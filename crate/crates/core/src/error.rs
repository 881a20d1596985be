//! Crate-wide error type.

use std::path::PathBuf;

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("failed to read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// A malformed record in a dataset or embedding file, with its line number.
    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("line {line}: expected {expected} vector components, found {found}")]
    DimensionMismatch {
        line: u64,
        expected: usize,
        found: usize,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("empty token sequence (id {0}): cannot encode a zero-length example")]
    EmptySequence(u64),

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("training requires at least one example per class")]
    SingleClass,

    #[error("{0}")]
    Json(#[from] serde_json::Error),
}
