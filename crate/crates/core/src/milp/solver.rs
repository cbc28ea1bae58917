use std::path::PathBuf;
use std::process::Command;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::Instant;

use highs::{HighsModelStatus, HighsSolutionStatus, RowProblem, Sense};
use serde::{Deserialize, Serialize};

use super::model::{MilpModel, RowSense};
use super::mps::write_mps;
use super::solution::{Solution, SolveStatus};
use super::MilpError;

/// Environment variable naming an external solver executable.
pub const SOLVER_ENV: &str = "TIMEREP_SOLVER";

/// Largest relative gap still reported as `Optimal`.
pub const OPTIMAL_GAP: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    /// Relative MIP gap; 0 asks for proven optimality.
    pub gap: f64,
    /// Wall-clock limit in seconds.
    pub time_limit: Option<f64>,
    pub threads: Option<u32>,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            gap: 0.0,
            time_limit: None,
            threads: None,
        }
    }
}

pub trait SolverAdapter: Send + Sync {
    fn name(&self) -> &str;
    /// Whether several `solve` calls may run at the same time.
    fn concurrency_safe(&self) -> bool;
    /// Solve a minimization model. A returned `Solution` may still carry a
    /// non-optimal status; `Err` is reserved for solver malfunctions.
    fn solve(&self, model: &MilpModel, options: &SolverOptions) -> Result<Solution, MilpError>;
}

/// In-process HiGHS. Pure LPs also return row duals.
#[derive(Debug, Clone, Default)]
pub struct HighsSolver;

impl SolverAdapter for HighsSolver {
    fn name(&self) -> &str {
        "highs"
    }

    fn concurrency_safe(&self) -> bool {
        true
    }

    fn solve(&self, model: &MilpModel, options: &SolverOptions) -> Result<Solution, MilpError> {
        model.validate()?;
        let start = Instant::now();
        if model.num_vars() == 0 {
            let feasible = model.constraints.iter().all(|c| c.violation(&[]) <= 1e-9);
            return Ok(if feasible {
                Solution {
                    status: SolveStatus::Optimal,
                    objective: model.objective_offset,
                    values: Vec::new(),
                    gap: 0.0,
                    seconds: 0.0,
                    duals: Some(vec![0.0; model.num_rows()]),
                }
            } else {
                Solution::failed(SolveStatus::Infeasible, 0.0)
            });
        }
        let mut pb = RowProblem::default();
        let cols: Vec<_> = model
            .variables
            .iter()
            .map(|v| pb.add_column_with_integrality(v.objective, v.lower..=v.upper, v.integer))
            .collect();
        for c in &model.constraints {
            let (lo, up) = match c.sense {
                RowSense::Le => (f64::NEG_INFINITY, c.rhs),
                RowSense::Ge => (c.rhs, f64::INFINITY),
                RowSense::Eq => (c.rhs, c.rhs),
            };
            pb.add_row(lo..=up, c.coefficients.iter().map(|&(v, a)| (cols[v.0], a)));
        }
        let mut h = pb
            .try_optimise(Sense::Minimise)
            .map_err(|e| MilpError::Solver("highs".into(), format!("{e:?}")))?;
        h.make_quiet();
        h.set_option("mip_rel_gap", options.gap);
        if options.gap == 0.0 {
            h.set_option("mip_abs_gap", 0.0);
        }
        if let Some(t) = options.time_limit {
            h.set_option("time_limit", t);
        }
        if let Some(n) = options.threads {
            h.set_option("threads", n as i32);
        }
        let solved = h
            .try_solve()
            .map_err(|e| MilpError::Solver("highs".into(), format!("{e:?}")))?;
        let seconds = start.elapsed().as_secs_f64();
        let has_primal = solved.primal_solution_status() == HighsSolutionStatus::Feasible;
        let status = match solved.status() {
            HighsModelStatus::Optimal => SolveStatus::Optimal,
            HighsModelStatus::Infeasible | HighsModelStatus::UnboundedOrInfeasible => {
                SolveStatus::Infeasible
            }
            HighsModelStatus::Unbounded => SolveStatus::Unbounded,
            HighsModelStatus::ReachedTimeLimit
            | HighsModelStatus::ReachedIterationLimit
            | HighsModelStatus::ReachedSolutionLimit
            | HighsModelStatus::ObjectiveBound
            | HighsModelStatus::ObjectiveTarget
            | HighsModelStatus::ReachedInterrupt
            | HighsModelStatus::ReachedMemoryLimit => {
                if has_primal {
                    SolveStatus::GapLimit
                } else {
                    SolveStatus::NoSolution
                }
            }
            other => {
                return Err(MilpError::Solver("highs".into(), format!("{other:?}")));
            }
        };
        if !status.has_solution() {
            return Ok(Solution::failed(status, seconds));
        }
        let sol = solved.get_solution();
        let values = sol.columns().to_vec();
        let lp = model.num_integer() == 0;
        let gap = if lp { 0.0 } else { solved.mip_gap().max(0.0) };
        let gap = if gap.is_finite() { gap } else { 0.0 };
        let status = if status == SolveStatus::Optimal && gap > OPTIMAL_GAP {
            SolveStatus::GapLimit
        } else {
            status
        };
        Ok(Solution {
            status,
            objective: model.objective_value(&values),
            values,
            gap,
            seconds,
            duals: lp.then(|| sol.dual_rows().to_vec()),
        })
    }
}

/// Runs `<exe> <model.mps> <solution.sol>` and reads the solution file back.
/// Options are passed as `TIMEREP_GAP`, `TIMEREP_TIME_LIMIT` and
/// `TIMEREP_THREADS` in the child environment.
#[derive(Debug, Clone)]
pub struct ExternalSolver {
    pub executable: PathBuf,
    pub work_dir: PathBuf,
}

impl ExternalSolver {
    pub fn new(executable: impl Into<PathBuf>) -> Self {
        Self {
            executable: executable.into(),
            work_dir: std::env::temp_dir(),
        }
    }
}

static RUN_COUNTER: AtomicUsize = AtomicUsize::new(0);

impl SolverAdapter for ExternalSolver {
    fn name(&self) -> &str {
        self.executable
            .file_name()
            .and_then(|s| s.to_str())
            .unwrap_or("external")
    }

    fn concurrency_safe(&self) -> bool {
        true
    }

    fn solve(&self, model: &MilpModel, options: &SolverOptions) -> Result<Solution, MilpError> {
        let run = RUN_COUNTER.fetch_add(1, Ordering::Relaxed);
        let dir = self
            .work_dir
            .join(format!("timerep-{}-{run}", std::process::id()));
        std::fs::create_dir_all(&dir)?;
        let mps = dir.join("model.mps");
        let sol = dir.join("solution.sol");
        write_mps(model, std::io::BufWriter::new(std::fs::File::create(&mps)?))?;
        let mut cmd = Command::new(&self.executable);
        cmd.arg(&mps).arg(&sol);
        cmd.env("TIMEREP_GAP", options.gap.to_string());
        if let Some(t) = options.time_limit {
            cmd.env("TIMEREP_TIME_LIMIT", t.to_string());
        }
        if let Some(n) = options.threads {
            cmd.env("TIMEREP_THREADS", n.to_string());
        }
        let start = Instant::now();
        let out = cmd
            .output()
            .map_err(|e| MilpError::Solver(self.name().into(), e.to_string()))?;
        let elapsed = start.elapsed().as_secs_f64();
        if !out.status.success() {
            let _ = std::fs::remove_dir_all(&dir);
            return Err(MilpError::Solver(
                self.name().into(),
                format!("{}: {}", out.status, String::from_utf8_lossy(&out.stderr).trim()),
            ));
        }
        let read = std::fs::File::open(&sol)
            .map_err(MilpError::from)
            .and_then(|f| Solution::read(model, std::io::BufReader::new(f)));
        let _ = std::fs::remove_dir_all(&dir);
        let mut solution = read?;
        if solution.seconds == 0.0 {
            solution.seconds = elapsed;
        }
        Ok(solution)
    }
}

/// HiGHS unless `TIMEREP_SOLVER` names an executable.
pub fn adapter_from_env() -> Box<dyn SolverAdapter> {
    match std::env::var_os(SOLVER_ENV) {
        Some(p) if !p.is_empty() => adapter_by_name(&p.to_string_lossy()),
        _ => Box::new(HighsSolver),
    }
}

/// `"highs"` selects the built-in solver; anything else is an executable path.
pub fn adapter_by_name(name: &str) -> Box<dyn SolverAdapter> {
    if name.eq_ignore_ascii_case("highs") {
        Box::new(HighsSolver)
    } else {
        Box::new(ExternalSolver::new(name))
    }
}
