use alloc::string::String;

use thiserror::Error;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error("empty input: {0}")]
    Empty(&'static str),
    #[error("invalid dataset: {0}")]
    InvalidDataset(String),
    #[error("positive example {index} has no prototype assignment")]
    MissingAssignment { index: usize },
    #[error("non-finite values in {block} at iteration {iteration}")]
    NonFinite {
        iteration: usize,
        block: &'static str,
    },
    #[error("{block} left the feasible set at iteration {iteration} (violation {violation:e})")]
    Infeasible {
        iteration: usize,
        block: &'static str,
        violation: f64,
    },
    #[error("invalid DNF formula: {0}")]
    Dnf(String),
    #[error("optimizer diverged after {iterations} iterations")]
    Diverged { iterations: usize },
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
