//! Small, deterministic LP and MIP engines.
//!
//! [`solve_lp`] is a bounded-variable revised simplex with a dense explicit
//! basis inverse, Dantzig pricing and a Bland fallback once degenerate pivots
//! pile up. [`solve_mip`] runs best-bound branch-and-bound on top of it.
//!
//! Both are sized for desk-scale models (hundreds of rows, low thousands of
//! columns). Nothing here is specific to load planning.

mod error;
mod lp;
mod lp_format;
mod mip;
mod simplex;

pub use error::{LpError, MipError};
pub use lp::{LinearProgram, Row, Sense};
pub use lp_format::write_lp_format;
pub use mip::{
    integrality_gap_report, solve_mip, GapReport, MipLogEntry, MipOptions, MipResult, MipStatus,
    MixedIntegerProgram,
};
pub use simplex::{solve_lp, solve_lp_warm, Basis, LpSolution, LpStatus, VarStatus};

/// Primal feasibility tolerance on rows and bounds.
pub const FEASIBILITY_TOL: f64 = 1e-6;
/// Reduced-cost tolerance for optimality.
pub const OPTIMALITY_TOL: f64 = 1e-7;
/// Smallest admissible pivot magnitude.
pub const PIVOT_TOL: f64 = 1e-9;
/// Distance from an integer under which a value counts as integral.
pub const INTEGRALITY_TOL: f64 = 1e-5;
