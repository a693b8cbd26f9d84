use thiserror::Error;

use crate::algebra::GroupTag;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FrameError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("group mismatch: expected {expected}, found {found}")]
    GroupMismatch { expected: GroupTag, found: GroupTag },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("not a valid group element: {0}")]
    InvalidElement(String),

    #[error("matrix is not symmetric (asymmetry {0:.3e})")]
    NotSymmetric(f64),

    #[error("collection fails to separate the point cloud")]
    NotSeparated,

    #[error("n = {n} is too large for exhaustive enumeration (limit {limit})")]
    TooLarge { n: usize, limit: usize },

    #[error("budget exceeded: need {needed} evaluations, budget is {budget}")]
    BudgetExceeded { needed: u128, budget: usize },

    #[error("unsupported stabilizer: {0}")]
    UnsupportedStabilizer(String),

    #[error("construction failed: {0}")]
    Construction(String),

    #[error("training diverged: {0}")]
    Diverged(String),
}

pub type Result<T, E = FrameError> = std::result::Result<T, E>;
