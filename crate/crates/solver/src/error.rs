use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LpError {
    #[error("row {row} references column {col} but the model has {num_vars} columns")]
    BadColumn { row: usize, col: usize, num_vars: usize },
    #[error("non-finite coefficient in {0}")]
    NotFinite(String),
    #[error("variable {var} has infinite lower bound")]
    InfiniteLowerBound { var: usize },
    #[error("variable {var}: lower bound {lower} exceeds upper bound {upper}")]
    BoundCrossing { var: usize, lower: f64, upper: f64 },
    #[error("variable {var}: new lower bound {new} is below current lower bound {current}")]
    BoundLoosening { var: usize, current: f64, new: f64 },
    #[error("variable index {var} out of range ({num_vars} variables)")]
    NoSuchVariable { var: usize, num_vars: usize },
    #[error("numerical failure: {0}")]
    NumericalFailure(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MipError {
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error("integer variable {0} is out of range")]
    BadIntegerVar(usize),
    #[error("binary variable {0} must have bounds within [0, 1]")]
    BadBinaryVar(usize),
    #[error("the LP relaxation is unbounded")]
    Unbounded,
    #[error("initial incumbent rejected: {0}")]
    BadIncumbent(String),
}
