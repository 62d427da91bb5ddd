//! Error type shared by the whole crate.

use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// Errors produced by geometry validation, data handling, file formats, and
/// the processing pipeline.
#[derive(Debug, Error)]
pub enum Error {
    /// A constructor or operation received a parameter that violates its
    /// documented preconditions.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// Array, image, or dataset shapes do not agree.
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    /// An index is outside its valid range.
    #[error("index out of range: {0}")]
    IndexOutOfRange(String),

    /// A file does not conform to one of the on-disk formats.
    #[error("{0}")]
    Format(String),

    /// A key = value configuration file could not be parsed.
    #[error("config error: {0}")]
    Config(String),

    /// A metric could not be evaluated on the given data.
    #[error("metric error: {0}")]
    Metric(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::ShapeMismatch(msg.into())
    }
}
