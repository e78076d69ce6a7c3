use thiserror::Error;

/// Errors raised by the key length engine.
///
/// "No key" outcomes are not errors: they surface as `ell == 0` together with
/// a [`crate::NoKeyReason`] on the result.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An input lies outside the domain of a function.
    #[error("domain error: {0}")]
    Domain(String),

    /// A configuration value violates a protocol or search invariant.
    #[error("configuration error: {0}")]
    Config(String),

    /// A numeric procedure produced a non-finite value.
    #[error("numeric failure: {0}")]
    Numeric(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}

pub(crate) fn config(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}
