use std::io;

use thiserror::Error;

/// Errors raised by the solver library.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain where the quantity is defined.
    #[error("domain error: {0}")]
    Domain(String),

    /// Inconsistent or missing configuration (empty grids, horizon mismatch, ...).
    #[error("configuration error: {0}")]
    Config(String),

    /// A grid file could not be decoded.
    #[error("corrupt grid file: {0}")]
    Corrupt(String),

    #[error("unsupported grid file version {found} (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },

    /// A brute-force oracle was asked to enumerate an instance above its size limit.
    #[error("instance too large for exhaustive enumeration: {0}")]
    TooLarge(String),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}

pub(crate) fn config(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}
