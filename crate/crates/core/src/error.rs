use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    /// An argument lies outside the domain of the operation (bad point,
    /// mismatched degree, singular matrix, element not in the group...).
    #[error("domain error: {0}")]
    Domain(String),

    /// An index lies outside the declared range of an indexing.
    #[error("range error: {0}")]
    Range(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("config error at line {line}: {msg}")]
    Config { line: usize, msg: String },

    /// A structure failed one of its own invariants. Indicates a bug or an
    /// object that was not built through the checked constructors.
    #[error("invariant violation: {0}")]
    Invariant(String),

    /// A randomized construction exhausted its retry budget.
    #[error("build failure: {0}")]
    Build(String),

    #[error("audit failure: {0}")]
    Audit(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}

pub(crate) fn range(msg: impl Into<String>) -> Error {
    Error::Range(msg.into())
}

pub(crate) fn parse(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        line,
        msg: msg.into(),
    }
}
