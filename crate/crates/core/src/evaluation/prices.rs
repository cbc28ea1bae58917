use serde::{Deserialize, Serialize};

use crate::formulations::FormulationOutput;
use crate::milp::{RowSense, Solution};

use super::EvalError;

const INTERIOR_TOL: f64 = 1e-7;

/// Marginal price of every slot and node, per real hour.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlotPrices {
    /// slot × node, k€/GWh
    pub prices: Vec<Vec<f64>>,
    /// The LP optimum is primal degenerate, so the duals are not unique.
    pub degenerate: bool,
}

/// Prices from the duals of the balance rows of the fixed LP. A slot
/// standing for several hours carries their summed cost, so its dual is
/// divided by the slot weight.
pub fn compute_prices(output: &FormulationOutput, lp: &Solution) -> Result<SlotPrices, EvalError> {
    let duals = lp.duals.as_ref().ok_or(EvalError::NoDuals)?;
    if lp.values.len() != output.model.num_vars() {
        return Err(EvalError::NoValues);
    }
    let prices = output
        .periods
        .iter()
        .zip(&output.weights)
        .map(|(pv, &w)| {
            pv.balance
                .iter()
                .map(|r| duals[r.0] / if w > 0.0 { w } else { 1.0 })
                .collect()
        })
        .collect();
    Ok(SlotPrices {
        prices,
        degenerate: is_degenerate(output, &lp.values),
    })
}

/// Fewer strictly interior quantities (variables off their bounds plus
/// slack inequality rows) than rows means some basic variable sits at a
/// bound.
fn is_degenerate(output: &FormulationOutput, values: &[f64]) -> bool {
    let m = &output.model;
    let near = |a: f64, b: f64| b.is_finite() && (a - b).abs() <= INTERIOR_TOL * (1.0 + b.abs());
    let interior_vars = m
        .variables
        .iter()
        .zip(values)
        .filter(|(v, &x)| !near(x, v.lower) && !near(x, v.upper))
        .count();
    let slack_rows = m
        .constraints
        .iter()
        .filter(|c| c.sense != RowSense::Eq && !near(c.activity(values), c.rhs))
        .count();
    interior_vars + slack_rows < m.num_rows()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formulations::fixtures::*;
    use crate::formulations::build_hm;
    use crate::milp::{fix_and_relax, HighsSolver, SolverAdapter, SolverOptions};

    #[test]
    fn committed_unit_sets_hourly_price() {
        let mut sys = one_of_each();
        sys.storage.clear();
        let data = flat_data(&sys, 3, 4.0, 0.0, 0.0);
        let out = build_hm(&sys, &data, false).unwrap();
        let mip = HighsSolver.solve(&out.model, &SolverOptions::default()).unwrap();
        let lp = fix_and_relax(&out.model, &mip, &HighsSolver).unwrap();
        let p = compute_prices(&out, &lp).unwrap();
        for row in &p.prices {
            assert!((row[0] - 10.0).abs() < 1e-6, "{row:?}");
        }
    }

    #[test]
    fn missing_duals_is_an_error() {
        let mut sys = one_of_each();
        sys.storage.clear();
        let data = flat_data(&sys, 2, 4.0, 0.0, 0.0);
        let out = build_hm(&sys, &data, false).unwrap();
        let mip = HighsSolver.solve(&out.model, &SolverOptions::default()).unwrap();
        assert!(matches!(compute_prices(&out, &mip), Err(EvalError::NoDuals)));
    }
}
