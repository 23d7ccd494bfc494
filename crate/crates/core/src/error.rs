use thiserror::Error;

use dlpp_solver::{LpError, MipError};

#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed instance document: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("invalid instance at {path}: {message}")]
    Validation { path: String, message: String },
    #[error("commodity {commodity} is not compatible with sort pair {sort_pair}")]
    IncompatiblePair { commodity: String, sort_pair: String },
    #[error("degenerate instance: {0}")]
    DegenerateInstance(String),
    #[error("instance has no reference plan")]
    MissingReference,
    #[error("{stage} found no incumbent within its limits")]
    NoIncumbent { stage: &'static str },
    #[error("{stage} is infeasible")]
    Infeasible { stage: &'static str },
    #[error("restoration failed to reach a feasible plan: {0}")]
    RestorationInfeasible(String),
    #[error("greedy heuristic exceeded {0} iterations")]
    IterationLimit(usize),
    #[error("plan rejected: {0}")]
    InfeasiblePlan(#[from] crate::plan::PlanViolation),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("model signature mismatch: {0}")]
    SignatureMismatch(String),
    #[error("empty dataset")]
    EmptyDataset,
    #[error("training diverged: {0}")]
    DivergenceDetected(String),
    #[error("empty averaging domain")]
    EmptyDomain,
    #[error("shifted value {0} is not positive")]
    NonpositiveShifted(f64),
    #[error("precondition violated: {0}")]
    PreconditionViolated(String),
    #[error("instance too large for exhaustive search: {0}")]
    TooLarge(String),
    #[error("enumeration budget exceeded: {0} candidate plans")]
    BudgetExceeded(u128),
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error(transparent)]
    Mip(#[from] MipError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn validation(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Validation { path: path.into(), message: message.into() }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
