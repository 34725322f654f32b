//! Crate-wide error type.
//!
//! Variants are grouped by how a caller should react: `Parameter` means the
//! request itself was invalid, `Convergence` means an iterative scheme ran
//! out of budget or went unstable, `Io`/`Format` wrap persistence failures.

use thiserror::Error;

#[derive(Error, Debug)]
pub enum Error {
    /// Input rejected before any computation ran.
    #[error("invalid parameter: {0}")]
    Parameter(String),

    /// An iterative scheme failed to converge or a stability bound was hit.
    #[error("convergence failure: {0}")]
    Convergence(String),

    /// Underlying file-system failure.
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    /// A file parsed but did not have the expected shape.
    #[error("format error: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn parameter(msg: impl Into<String>) -> Self {
        Error::Parameter(msg.into())
    }

    pub fn convergence(msg: impl Into<String>) -> Self {
        Error::Convergence(msg.into())
    }

    pub fn format(msg: impl Into<String>) -> Self {
        Error::Format(msg.into())
    }
}
