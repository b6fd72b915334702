//! A small, dependency-free linear programming core.
//!
//! [`solve_lp`] is a two-phase, bounded-variable revised simplex method with an
//! explicit dense basis inverse. [`solve_mip`] runs best-bound branch-and-bound
//! over binary variables on top of it, warm-starting every node from its
//! parent's optimal basis.
//!
//! Problems are stated in minimization form with `≤`, `≥` and `=` rows and
//! per-variable bounds that may be infinite.

mod factor;
mod lp_format;
mod mip;
mod model;
mod simplex;

pub use lp_format::write_lp_format;
pub use mip::{solve_mip, MipOptions, MipResult, MipStatus, TracePoint};
pub use model::{Constraint, LinearProgram, MipProblem, ModelError, Relation, VarId};
pub use simplex::{solve_lp, solve_lp_with, Basis, LpSolution, LpStatus, SimplexOptions, VarStatus};

use thiserror::Error;

/// Failures that are not a property of the problem itself.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum LpError {
    #[error("malformed problem: {0}")]
    Model(#[from] ModelError),
    #[error("simplex made no progress after {iterations} iterations")]
    NumericalFailure { iterations: usize },
    #[error("warm start is not integer-feasible: {0}")]
    InvalidWarmStart(String),
}
