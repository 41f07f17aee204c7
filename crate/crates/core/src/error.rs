use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument outside the operation's domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// Exact enumeration refused because the support is too large.
    #[error("support of {support} outcomes exceeds the cap of {cap}")]
    CapExceeded { support: u128, cap: u128 },

    /// A result that does not fit the floating-point range.
    #[error("overflow: {0}")]
    Overflow(String),

    /// A threshold solver that found no root on its domain.
    #[error("no solution: {0}")]
    NoSolution(String),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
