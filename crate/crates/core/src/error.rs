use std::io;

use thiserror::Error;

/// Errors produced by the recommendation engine.
#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("empty input: {0}")]
    Empty(String),

    #[error("unknown {kind} `{name}`")]
    Unknown { kind: &'static str, name: String },

    #[error("{what} index {index} out of range (size {size})")]
    OutOfRange { what: &'static str, index: usize, size: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("non-finite value in {block} after epoch {epoch}")]
    NonFinite { block: String, epoch: usize },

    #[error("singular normal equations while solving {side} row {row}")]
    Singular { side: &'static str, row: usize },

    #[error("scorer returned NaN for user {user}, item {item}")]
    NanScore { user: usize, item: usize },

    #[error("zero-norm vector for `{0}`")]
    ZeroNorm(String),

    #[error("malformed file: {0}")]
    Format(String),

    #[error("feature mismatch: {0}")]
    FeatureMismatch(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
