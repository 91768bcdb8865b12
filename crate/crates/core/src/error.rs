//! Error type shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A caller-supplied parameter violates a precondition.
    #[error("invalid parameter: {0}")]
    Parameter(String),

    /// Two values that must belong together do not (e.g. grid mismatch).
    #[error("contract violation: {0}")]
    Contract(String),

    /// The requested point lies outside the mathematical domain of validity.
    #[error("outside domain of validity: {0}")]
    Domain(String),

    /// A case the implementation deliberately does not cover.
    #[error("unsupported case: {0}")]
    Unsupported(String),

    /// An iterative numerical procedure failed to converge or produced
    /// non-finite values.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// Configuration file could not be parsed.
    #[error("config error: {0}")]
    Config(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
