use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// The truncated series cannot meet its accuracy target at this time step.
    #[error("taylor remainder bound {bound:e} exceeds {target:e}")]
    TaylorRemainder { bound: f64, target: f64 },

    /// A precondition on an argument combination was violated.
    #[error("precondition violated: {0}")]
    Precondition(String),

    /// A broken internal invariant (dimension mismatch, solver failure).
    #[error("internal error: {0}")]
    Internal(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
