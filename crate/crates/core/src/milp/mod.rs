//! Solver-agnostic MILP layer. Everything here is `f64`: values cross into
//! solver libraries and files at this boundary.

pub mod model;
pub mod mps;
pub mod relax;
pub mod solution;
pub mod solver;

pub use model::{Constraint, Key, MilpModel, RowId, RowSense, VarId, Variable};
pub use mps::{parse_mps, write_mps, Registry};
pub use relax::fix_and_relax;
pub use solution::{Solution, SolveStatus};
pub use solver::{adapter_by_name, adapter_from_env, ExternalSolver, HighsSolver, SolverAdapter, SolverOptions};

#[derive(Debug, thiserror::Error)]
pub enum MilpError {
    #[error("invalid model: {0}")]
    Invalid(String),
    #[error("MPS line {0}: {1}")]
    Parse(usize, String),
    #[error("solution file: {0}")]
    SolutionFormat(String),
    #[error("solver `{0}` failed: {1}")]
    Solver(String, String),
    #[error("no feasible solution: {0:?}")]
    NoSolution(SolveStatus),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
