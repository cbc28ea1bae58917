use super::model::MilpModel;
use super::solution::Solution;
use super::solver::{SolverAdapter, SolverOptions};
use super::MilpError;

/// Copy of `model` with every integer variable fixed at its rounded value in
/// `incumbent` and integrality dropped.
pub fn fixed_lp(model: &MilpModel, incumbent: &Solution) -> MilpModel {
    let mut lp = model.clone();
    lp.name = format!("{}_FIXED", model.name);
    for (j, v) in lp.variables.iter_mut().enumerate() {
        if v.integer {
            let x = incumbent.values[j].round().clamp(v.lower, v.upper);
            v.lower = x;
            v.upper = x;
            v.integer = false;
        }
    }
    lp
}

/// Fix the integer decisions of `incumbent` and re-solve the remaining LP to
/// obtain row duals. The returned solution carries the LP values and duals.
pub fn fix_and_relax(
    model: &MilpModel,
    incumbent: &Solution,
    solver: &dyn SolverAdapter,
) -> Result<Solution, MilpError> {
    if !incumbent.status.has_solution() {
        return Err(MilpError::NoSolution(incumbent.status));
    }
    let lp = fixed_lp(model, incumbent);
    let solved = solver.solve(&lp, &SolverOptions::default())?;
    if !solved.status.has_solution() {
        return Err(MilpError::NoSolution(solved.status));
    }
    if solved.duals.is_none() {
        return Err(MilpError::Solver(
            solver.name().into(),
            "no duals returned for the fixed LP".into(),
        ));
    }
    Ok(solved)
}
