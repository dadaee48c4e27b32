use thiserror::Error;

use crate::solver::SolveStatus;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("unsupported mode: {0}")]
    UnsupportedMode(String),

    /// Initialization could not reach strict feasibility; names the binding constraint.
    #[error("initialization failed: constraint {0} cannot be made strictly feasible")]
    Initialization(String),

    #[error("subproblem precondition violated: {0}")]
    Precondition(String),

    #[error("subproblem solver returned {status:?}: {detail}")]
    Subproblem { status: SolveStatus, detail: String },

    #[error("all {restarts} CCCP restarts failed: {diagnostics}")]
    AllRestartsFailed { restarts: usize, diagnostics: String },

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
