//! Recomputes constraint families straight from the data and the solution
//! values, without reading the rows of the built model.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::formulations::{FormulationKind, FormulationOutput};
use crate::milp::{Solution, VarId};
use crate::system::{PowerSystem, StorageKind};
use crate::HorizonData;

use super::{EvalError, TimeMap};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyAudit {
    pub family: String,
    pub checked: usize,
    /// Largest residual, scaled by `max(1, largest term)`.
    pub max_residual: f64,
    /// Where the largest residual occurred.
    pub worst: Option<String>,
}

impl FamilyAudit {
    fn new(family: &str) -> Self {
        Self {
            family: family.into(),
            checked: 0,
            max_residual: 0.0,
            worst: None,
        }
    }

    /// Record `lhs − rhs` for an equality (`eq`) or `lhs ≥ rhs`.
    fn record(&mut self, lhs: f64, rhs: f64, scale: f64, eq: bool, at: impl FnOnce() -> String) {
        let gap = if eq { (lhs - rhs).abs() } else { (rhs - lhs).max(0.0) };
        let r = gap / scale.max(1.0);
        self.checked += 1;
        if r > self.max_residual || r.is_nan() {
            self.max_residual = r;
            self.worst = Some(at());
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub kind: FormulationKind,
    pub families: Vec<FamilyAudit>,
}

impl AuditReport {
    pub fn family(&self, name: &str) -> Option<&FamilyAudit> {
        self.families.iter().find(|f| f.family == name)
    }

    pub fn max_residual(&self) -> f64 {
        self.families.iter().map(|f| f.max_residual).fold(0.0, f64::max)
    }

    pub fn passes(&self, tolerance: f64) -> bool {
        self.families.iter().all(|f| f.max_residual <= tolerance)
    }
}

/// Sum of `coef · value` and the largest term magnitude.
struct Acc {
    sum: f64,
    scale: f64,
}

impl Acc {
    fn new(constant: f64) -> Self {
        Self {
            sum: constant,
            scale: constant.abs(),
        }
    }

    fn add(&mut self, term: f64) {
        self.sum += term;
        self.scale = self.scale.max(term.abs());
    }
}

/// Audit every instance of the constraint families that apply to the
/// formulation. Checkpoint families cover both bounds.
pub fn audit(
    output: &FormulationOutput,
    solution: &Solution,
    system: &PowerSystem,
    data: &HorizonData,
    map: TimeMap<'_>,
) -> Result<AuditReport, EvalError> {
    let kind = output.kind();
    if !map.fits(kind) {
        return Err(EvalError::WrongMap { kind });
    }
    if solution.values.len() != output.model.num_vars() {
        return Err(EvalError::NoValues);
    }
    let x = |v: VarId| solution.values[v.0];
    let investment = output.investment_values(&solution.values);

    // data row behind a model slot
    let slot_demand = |s: usize, n: usize| match map {
        TimeMap::Hourly => data.demand[[s, n]],
        TimeMap::States(st) => st.demand(s, n),
        TimeMap::RepPeriods(rp) => data.demand[[rep_hour(rp, s), n]],
    };
    let slot_inflow = |s: usize, h: usize| match map {
        TimeMap::Hourly => data.inflows[[s, h]],
        TimeMap::States(st) => st.inflow(s, h),
        TimeMap::RepPeriods(rp) => data.inflows[[rep_hour(rp, s), h]],
    };

    let mut families = Vec::new();

    // balance
    let network = system.network().map_err(|e| EvalError::System(e.to_string()))?;
    let mut f = FamilyAudit::new("balance");
    for (s, pv) in output.periods.iter().enumerate() {
        for (n, bus) in system.buses.iter().enumerate() {
            let mut acc = Acc::new(0.0);
            for (i, t) in system.thermal.iter().enumerate() {
                if t.bus == bus.id {
                    acc.add(x(pv.q[i]));
                }
            }
            for (i, h) in system.storage.iter().enumerate() {
                if h.bus == bus.id {
                    acc.add(x(pv.q_storage[i]));
                    acc.add(-x(pv.b[i]));
                }
            }
            acc.add(x(pv.v[n]));
            acc.add(x(pv.pns[n]));
            for (c, &(from, to)) in network.ends.iter().enumerate() {
                if to == n {
                    acc.add(x(pv.pf[c]));
                }
                if from == n {
                    acc.add(-x(pv.pf[c]));
                }
            }
            let d = slot_demand(s, n);
            f.record(acc.sum, d, acc.scale.max(d.abs()), true, || format!("slot {s} bus {}", bus.id));
        }
    }
    families.push(f);

    let net = |s: usize, i: usize, inflow: f64, acc: &mut Acc| {
        let pv = &output.periods[s];
        let h = &system.storage[i];
        acc.add(inflow);
        acc.add(-x(pv.q_storage[i]));
        acc.add(-x(pv.sp[i]));
        acc.add(h.efficiency * x(pv.b[i]));
    };

    // storage recursion
    if matches!(kind, FormulationKind::Hm | FormulationKind::Rp | FormulationKind::RpTmci) {
        let len = match map {
            TimeMap::RepPeriods(rp) => rp.periods_per_rp,
            _ => output.periods.len().max(1),
        };
        let mut f = FamilyAudit::new("storage_recursion");
        for s in 0..output.periods.len() {
            for (i, h) in system.storage.iter().enumerate() {
                let before = if s % len == 0 { h.w0 } else { x(output.periods[s - 1].w[i]) };
                let mut acc = Acc::new(before);
                net(s, i, slot_inflow(s, i), &mut acc);
                let w = x(output.periods[s].w[i]);
                f.record(w, acc.sum, acc.scale.max(w.abs()), true, || format!("slot {s} unit {}", h.id));
            }
        }
        families.push(f);
    }

    if let TimeMap::States(states) = map {
        let pairs: HashMap<(usize, usize), usize> = output
            .pairs
            .iter()
            .enumerate()
            .map(|(j, p)| ((p.from, p.to), j))
            .collect();

        // delta w
        let mut f = FamilyAudit::new("delta_w");
        for p in &output.pairs {
            for (i, h) in system.storage.iter().enumerate() {
                let mut acc = Acc::new(0.0);
                net(p.from, i, slot_inflow(p.from, i), &mut acc);
                net(p.to, i, slot_inflow(p.to, i), &mut acc);
                let dw = x(p.delta_w[i]);
                f.record(dw, 0.5 * acc.sum, acc.scale.max(dw.abs()), true, || {
                    format!("pair {}→{} unit {}", p.from + 1, p.to + 1, h.id)
                });
            }
        }
        families.push(f);

        // checkpoint hours, recounting the chain from the assignment
        let mut hours: Vec<usize> = output.checkpoint_rows.iter().map(|c| c.hour).collect();
        hours.sort_unstable();
        hours.dedup();
        let a = &states.assignment;
        let mut cumulative = Vec::with_capacity(hours.len());
        let mut window = Vec::with_capacity(hours.len());
        let mut prev_k: usize = 0;
        for &k in &hours {
            // pair (p, p+1) ends at 1-based hour p + 2
            let count = |lo: usize| {
                let mut c: HashMap<(usize, usize), u32> = HashMap::new();
                for p in lo..k.saturating_sub(1).min(a.len().saturating_sub(1)) {
                    *c.entry((a[p], a[p + 1])).or_default() += 1;
                }
                c
            };
            cumulative.push(count(0));
            window.push(count(prev_k.saturating_sub(1)));
            prev_k = k;
        }

        let mut cum = FamilyAudit::new("cumulative_checkpoint");
        let mut win = FamilyAudit::new("window_checkpoint");
        for (i, h) in system.storage.iter().enumerate() {
            let windowed = kind == FormulationKind::SsRfm && h.kind == StorageKind::ShortTerm;
            let (fam, counts) = if windowed {
                (&mut win, &window)
            } else {
                (&mut cum, &cumulative)
            };
            let (lo, up) = h.energy_bounds(investment[i]);
            for (k, c) in hours.iter().zip(counts) {
                let mut acc = Acc::new(0.0);
                for (&(s, t), &n) in c {
                    let j = *pairs.get(&(s, t)).ok_or(EvalError::MissingTransition(s, t))?;
                    acc.add(n as f64 * x(output.pairs[j].delta_w[i]));
                }
                let scale = acc.scale.max(up.abs());
                fam.record(acc.sum, lo - h.w0, scale, false, || format!("k {k} unit {} lower", h.id));
                fam.record(up - h.w0, acc.sum, scale, false, || format!("k {k} unit {} upper", h.id));
            }
        }
        families.push(cum);
        if kind == FormulationKind::SsRfm {
            families.push(win);
        }
    }

    if let TimeMap::RepPeriods(rp) = map {
        let len = rp.periods_per_rp;
        // day end
        if !output.daily_cycle_rows.is_empty() {
            let mut f = FamilyAudit::new("day_end");
            for r in 0..rp.num_rp {
                for (i, h) in system.storage.iter().enumerate() {
                    let w = x(output.periods[r * len + len - 1].w[i]);
                    f.record(w, h.w0, w.abs().max(h.w0.abs()), false, || format!("rp {} unit {}", r + 1, h.id));
                }
            }
            families.push(f);
        }

        // checkpoint chain, walking the real calendar hour by hour
        if kind == FormulationKind::RpTmci {
            let mut f = FamilyAudit::new("checkpoint_chain");
            let mut start = 0;
            for (j, cp) in output.storage_checkpoints.iter().enumerate() {
                let last = j + 1 == output.storage_checkpoints.len();
                for (i, h) in system.storage.iter().enumerate() {
                    let before = if j == 0 { h.w0 } else { x(output.storage_checkpoints[j - 1].w[i]) };
                    let mut acc = Acc::new(before);
                    for p in start..cp.hour {
                        net(rp.rep_index(p), i, data.inflows[[rp.mapped_hour(p), i]], &mut acc);
                    }
                    let w = x(cp.w[i]);
                    f.record(w, acc.sum, acc.scale.max(w.abs()), true, || format!("k {} unit {}", cp.hour, h.id));
                    let (lo, up) = h.energy_bounds(investment[i]);
                    let lo = if last { lo.max(h.w_fin) } else { lo };
                    f.record(w, lo, w.abs().max(lo.abs()), false, || format!("k {} unit {} lower", cp.hour, h.id));
                    f.record(up, w, w.abs().max(up.abs()), false, || format!("k {} unit {} upper", cp.hour, h.id));
                }
                start = cp.hour;
            }
            families.push(f);
        }
    }

    Ok(AuditReport { kind, families })
}

fn rep_hour(rp: &crate::aggregation::RepPeriodClustering, idx: usize) -> usize {
    let len = rp.periods_per_rp;
    rp.rep_hours(idx / len).start + idx % len
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formulations::build_hm;
    use crate::formulations::fixtures::*;
    use crate::milp::{HighsSolver, SolverAdapter, SolverOptions};

    #[test]
    fn hourly_solution_passes_and_tampering_is_caught() {
        let sys = one_of_each();
        let data = demand_profile(&sys, &[4.0, 9.0, 3.0, 8.0], 0.5);
        let out = build_hm(&sys, &data, false).unwrap();
        let mut sol = HighsSolver.solve(&out.model, &SolverOptions::default()).unwrap();
        let rep = audit(&out, &sol, &sys, &data, TimeMap::Hourly).unwrap();
        assert!(rep.passes(1e-6), "{rep:?}");
        assert_eq!(rep.family("balance").unwrap().checked, 4);
        sol.values[out.periods[2].w[0].0] += 0.1;
        let rep = audit(&out, &sol, &sys, &data, TimeMap::Hourly).unwrap();
        assert!(rep.family("storage_recursion").unwrap().max_residual > 1e-3);
        assert!(rep.family("balance").unwrap().max_residual < 1e-6);
    }
}
