use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A caller broke an operation's precondition (arity mismatch, basis
    /// without required constraint, and similar).
    #[error("contract violation: {0}")]
    ContractViolation(String),

    #[error("infeasible constraint: {0}")]
    InfeasibleConstraint(String),

    #[error("invalid problem: {0}")]
    InvalidProblem(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn contract(msg: impl Into<String>) -> Error {
    Error::ContractViolation(msg.into())
}
