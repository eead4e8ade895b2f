use thiserror::Error;

/// Errors raised across the crate.
///
/// The variants are coarse on purpose: the CLI maps each one onto a distinct
/// exit status, so callers mostly care about the category and the message.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A model or experiment parameter is out of range.
    #[error("configuration error: {0}")]
    Config(String),

    /// An operation was called with inconsistent arguments.
    #[error("usage error: {0}")]
    Usage(String),

    /// An argument lies outside the domain where the quantity is finite.
    #[error("domain error: {0}")]
    Domain(String),

    /// A numerical procedure could not produce a trustworthy value.
    #[error("numerical instability: {0}")]
    Instability(String),

    /// The requested combination of model and regime is not supported.
    #[error("unsupported: {0}")]
    Unsupported(String),

    /// A runtime diagnostic on the traffic assumptions failed.
    #[error("diagnostics: {0}")]
    Diagnostics(String),

    /// Not enough usable data points for a fit.
    #[error("insufficient data: {0}")]
    InsufficientData(String),
}

pub type Result<T> = std::result::Result<T, Error>;
