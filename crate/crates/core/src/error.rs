//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    /// A caller violated an operation precondition.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Malformed or truncated PPM/PGM input.
    #[error("ppm parse error: {0}")]
    PpmParse(String),

    /// Input format outside the supported set.
    #[error("unsupported format: {0}")]
    UnsupportedFormat(String),

    /// Shapes of two inputs that must agree do not.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// Bad key or value in a key=value config source.
    #[error("config key `{key}`: {reason}")]
    Config { key: String, reason: String },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
