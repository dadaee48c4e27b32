//! Subproblem solving, feasible initialization, the CCCP outer loop and rank
//! projection of the lifted covariances.

mod barrier;
mod cccp;
mod init;
mod project;

use serde::{Deserialize, Serialize};

pub use barrier::BarrierSolver;
pub use cccp::{cccp, cccp_seeded, quantization_floor, CccpOptions, IterationRecord, Solution, SolutionStatus};
pub use init::{initialize_feasible, max_feasible_scale};
pub use project::{rank_project, repair, project_point};

use crate::dcp::ConvexSubproblem;
use crate::error::Result;

/// Outcome of one subproblem solve.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Unbounded,
    NumericalFailure,
    IterationLimit,
}

#[derive(Clone, Debug)]
pub struct SubproblemResult {
    pub status: SolveStatus,
    pub x: Vec<f64>,
    pub objective: f64,
    /// Newton steps taken.
    pub iterations: usize,
}

/// Anything able to solve the convex shapes emitted by [`crate::dcp`].
///
/// `x0` is a starting point satisfying the equalities; solvers that need a
/// strictly feasible start must find one themselves when it is not.
pub trait SubproblemSolver: Sync {
    fn solve(&self, sp: &ConvexSubproblem, x0: &[f64]) -> Result<SubproblemResult>;
}
