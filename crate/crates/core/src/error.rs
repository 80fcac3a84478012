use crate::model::{ProductId, Violation};
use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("product {0} is not placed")]
    ProductNotPlaced(ProductId),

    #[error("invalid placement: {}", join_violations(.0))]
    InvalidPlacement(Vec<Violation>),

    #[error("no assignment places every sponsored product in one of its valid positions")]
    InfeasibleSponsoredAssignment,

    #[error("graph has no perfect matching")]
    NoPerfectMatching,

    #[error("parametric iteration did not converge within {iterations} iterations")]
    ConvergenceFailure { iterations: usize },

    #[error("product {0} has no element in the set")]
    ProductNotInSet(ProductId),

    #[error("ground set of {size} elements exceeds the enumeration guard of {limit}")]
    GroundSetTooLarge { size: usize, limit: usize },

    #[error("{what} = {size} exceeds oracle budget {limit}")]
    BudgetExceeded {
        what: &'static str,
        size: usize,
        limit: usize,
    },

    #[error("parse error at `{path}`: {message}")]
    Parse { path: String, message: String },

    #[error("validation error at `{key}`: {reason}")]
    Validation { key: String, reason: String },

    #[error("config error: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn validation(key: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Validation {
            key: key.into(),
            reason: reason.into(),
        }
    }

    /// Short machine-readable tag for error reports.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::ProductNotPlaced(_) => "product_not_placed",
            Error::InvalidPlacement(_) => "invalid_placement",
            Error::InfeasibleSponsoredAssignment => "infeasible_sponsored_assignment",
            Error::NoPerfectMatching => "no_perfect_matching",
            Error::ConvergenceFailure { .. } => "convergence_failure",
            Error::ProductNotInSet(_) => "product_not_in_set",
            Error::GroundSetTooLarge { .. } => "ground_set_too_large",
            Error::BudgetExceeded { .. } => "budget_exceeded",
            Error::Parse { .. } => "parse_error",
            Error::Validation { .. } => "validation_error",
            Error::Config(_) => "config_error",
        }
    }
}

fn join_violations(v: &[Violation]) -> String {
    v.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}
