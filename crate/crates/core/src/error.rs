use thiserror::Error;

/// Failure modes shared by every module.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),
    /// A numerical routine failed to converge or bracket a root.
    #[error("numeric error: {0}")]
    Numeric(String),
    /// A configuration is malformed or violates a precondition.
    #[error("config error: {0}")]
    Config(String),
    /// A runtime invariant was violated.
    #[error("invariant violation: {0}")]
    Invariant(String),
    /// A guard against runaway internal loops fired.
    #[error("internal error: {0}")]
    Internal(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}

pub(crate) fn numeric(msg: impl Into<String>) -> Error {
    Error::Numeric(msg.into())
}

pub(crate) fn config(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}
