use serde::{Deserialize, Serialize};

use crate::aggregation::{default_checkpoints, RepPeriodClustering, TransitionCounts};
use crate::milp::{Key, MilpModel, RowSense, VarId};
use crate::system::PowerSystem;
use crate::HorizonData;

use super::operational::{key, Operational, PeriodInput, Slot};
use super::{
    FormulationError, FormulationKind, FormulationMeta, FormulationOutput, PeriodVars,
    StorageCheckpoint,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TmciOptions {
    /// Hours between storage checkpoints; a multiple of the period length.
    pub window: usize,
    /// Commitment is linked between representative periods `a → b` when
    /// the number of observed transitions exceeds this value.
    pub link_threshold: f64,
    /// Keep the day-end level constraint of the plain representative model.
    pub keep_daily_cycle: bool,
}

impl Default for TmciOptions {
    fn default() -> Self {
        Self {
            window: 168,
            link_threshold: 0.0,
            keep_daily_cycle: false,
        }
    }
}

/// Representative days solved independently, each weighted by the number of
/// days it stands for. Every day starts from the initial storage level and
/// must end at or above it.
pub fn build_rp(
    system: &PowerSystem,
    data: &HorizonData,
    rp: &RepPeriodClustering,
    invest: bool,
) -> Result<FormulationOutput, FormulationError> {
    let (mut out, _) = build_days(system, data, rp, invest, FormulationKind::Rp)?;
    add_daily_cycle(&mut out, system, rp);
    out.meta
        .notes
        .push("terminal storage level not represented; each day ends at or above W0".into());
    Ok(out)
}

/// Representative days chained through the cluster indices: commitment is
/// carried across linked day pairs and storage is tracked at checkpoints
/// every `options.window` hours of the real calendar.
pub fn build_rp_tmci(
    system: &PowerSystem,
    data: &HorizonData,
    rp: &RepPeriodClustering,
    nrpp: &TransitionCounts,
    options: &TmciOptions,
    invest: bool,
) -> Result<FormulationOutput, FormulationError> {
    let len = rp.periods_per_rp;
    if options.window == 0 || !options.window.is_multiple_of(len) {
        return Err(FormulationError::BadWindow(options.window));
    }
    if nrpp.size != rp.num_rp {
        return Err(FormulationError::Dimensions(format!(
            "transition matrix is {0}×{0} for {1} representative periods",
            nrpp.size, rp.num_rp
        )));
    }
    let linked = |a: usize, b: usize| nrpp.get(a, b) as f64 > options.link_threshold;
    let (mut out, op) = build_days(system, data, rp, invest, FormulationKind::RpTmci)?;

    for ((a, b), _) in nrpp.iter() {
        if !linked(a, b) {
            continue;
        }
        let last = &out.periods[a * len + len - 1];
        let first = &out.periods[b * len];
        let rows: Vec<_> = system
            .thermal
            .iter()
            .enumerate()
            .map(|(i, t)| {
                let row = out.model.add_row(
                    Key::new("link").at("from", a + 1).at("to", b + 1).at("t", &t.id),
                    [(last.u[i], 1.0), (first.u[i], -1.0)],
                    RowSense::Eq,
                    0.0,
                );
                (a, b, i, row)
            })
            .collect();
        out.link_rows.extend(rows);
    }

    if options.keep_daily_cycle {
        add_daily_cycle(&mut out, system, rp);
    }

    // storage checkpoints along the real calendar
    let mut model = std::mem::take(&mut out.model);
    let horizon = rp.horizon_hours();
    let hours = default_checkpoints(horizon, options.window)
        .map_err(|_| FormulationError::BadWindow(options.window))?;
    let mut prev: Option<Vec<VarId>> = None;
    let mut start = 0;
    for (j, &end) in hours.iter().enumerate() {
        let slot: Slot = vec![("k", end.to_string())];
        // how often each representative hour occurs inside the window
        let mut uses = vec![0u32; rp.num_rp * len];
        for p in start..end {
            uses[rp.rep_index(p)] += 1;
        }
        let last = j + 1 == hours.len();
        let mut w = Vec::new();
        let mut rows = Vec::new();
        for (i, h) in system.storage.iter().enumerate() {
            let k = |s: &str| key(s, &slot).at("h", &h.id);
            let wc = op.add_level_var(&mut model, k("wc"), i, last.then_some(h.w_fin));
            let mut coefs = vec![(wc, 1.0)];
            let mut rhs = 0.0;
            match &prev {
                Some(prev) => coefs.push((prev[i], -1.0)),
                None => rhs += h.w0,
            }
            for (idx, &c) in uses.iter().enumerate() {
                if c == 0 {
                    continue;
                }
                let c = c as f64;
                let pv = &out.periods[idx];
                coefs.push((pv.q_storage[i], c));
                coefs.push((pv.sp[i], c));
                coefs.push((pv.b[i], -c * h.efficiency));
                rhs += c * data.inflows[[rep_hour(rp, idx), i]];
            }
            rows.push(model.add_row(k("checkpoint_level"), coefs, RowSense::Eq, rhs));
            w.push(wc);
        }
        out.storage_checkpoints.push(StorageCheckpoint { hour: end, w: w.clone(), rows });
        prev = Some(w);
        start = end;
    }
    out.model = model;
    out.meta.notes.push(format!(
        "{} storage checkpoints every {} h; terminal level enforced at hour {horizon}",
        hours.len(),
        options.window
    ));
    if !options.keep_daily_cycle {
        out.meta.notes.push("day-end level constraint not applied".into());
    }
    Ok(out)
}

/// Real hour (row of the hourly data) behind concatenated index `idx`.
fn rep_hour(rp: &RepPeriodClustering, idx: usize) -> usize {
    let len = rp.periods_per_rp;
    rp.medoid_days[idx / len] * len + idx % len
}

fn add_daily_cycle(out: &mut FormulationOutput, system: &PowerSystem, rp: &RepPeriodClustering) {
    let len = rp.periods_per_rp;
    for r in 0..rp.num_rp {
        let last = &out.periods[r * len + len - 1];
        let rows = system
            .storage
            .iter()
            .enumerate()
            .map(|(i, h)| {
                out.model.add_row(
                    Key::new("day_end").at("rp", r + 1).at("h", &h.id),
                    [(last.w[i], 1.0)],
                    RowSense::Ge,
                    h.w0,
                )
            })
            .collect();
        out.daily_cycle_rows.push(rows);
    }
}

/// Shared representative-day block. `predecessor(rp)` names the period whose
/// last hour precedes the first hour of `rp` for startup accounting; `None`
/// compares with the initial commitment.
fn build_days<'a>(
    system: &'a PowerSystem,
    data: &HorizonData,
    rp: &RepPeriodClustering,
    invest: bool,
    kind: FormulationKind,
) -> Result<(FormulationOutput, Operational<'a>), FormulationError> {
    if data.horizon_hours() != rp.horizon_hours() {
        return Err(FormulationError::Dimensions(format!(
            "data covers {} h, clustering {} h",
            data.horizon_hours(),
            rp.horizon_hours()
        )));
    }
    let len = rp.periods_per_rp;
    let mut model = MilpModel::new(kind.stem().to_ascii_uppercase());
    let op = Operational::new(system, &mut model, invest)?;
    op.check_hourly_data(data)?;

    let slot = |r: usize, k: usize| -> Slot { vec![("rp", (r + 1).to_string()), ("hr", (k + 1).to_string())] };
    let mut periods: Vec<PeriodVars> = Vec::with_capacity(rp.num_rp * len);
    let mut weights = Vec::with_capacity(rp.num_rp * len);
    let mut inflows = Vec::with_capacity(rp.num_rp * len);
    for r in 0..rp.num_rp {
        let wg = rp.weights[r] as f64;
        for (k, hour) in rp.rep_hours(r).enumerate() {
            let input = PeriodInput::hour(data, hour, wg);
            periods.push(op.add_period(&mut model, &slot(r, k), &input));
            weights.push(wg);
            inflows.push(input.inflow);
        }
    }
    for r in 0..rp.num_rp {
        let wg = rp.weights[r] as f64;
        for k in 0..len {
            let idx = r * len + k;
            let prev_u = (k > 0).then(|| periods[idx - 1].u.clone());
            let prev_w = (k > 0).then(|| periods[idx - 1].w.clone());
            let mut pv = std::mem::take(&mut periods[idx]);
            op.add_startups(&mut model, &slot(r, k), &mut pv, prev_u.as_deref(), wg);
            op.add_levels(&mut model, &slot(r, k), &mut pv, prev_w.as_deref(), &inflows[idx], |_| None);
            periods[idx] = pv;
        }
    }
    let investment = op.investment.clone();
    let mut out = FormulationOutput::new(
        model,
        FormulationMeta {
            kind,
            axis: kind.axis(),
            invest,
            num_periods: periods.len(),
            notes: Vec::new(),
        },
    );
    out.periods = periods;
    out.weights = weights;
    out.investment = investment;
    Ok((out, op))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::aggregation::build_rp_transition_matrix;
    use crate::formulations::build_hm;
    use crate::formulations::fixtures::*;
    use crate::milp::{HighsSolver, SolverAdapter, SolverOptions};

    fn day_profile() -> Vec<f64> {
        (0..24).map(|h| 3.0 + (h % 6) as f64).collect()
    }

    #[test]
    fn identical_days_equal_scaled_hourly_day() {
        let sys = one_of_each();
        let day = day_profile();
        let days = 3;
        let full: Vec<f64> = day.iter().cycle().take(24 * days).copied().collect();
        let data = demand_profile(&sys, &full, 0.0);
        let rp = RepPeriodClustering::from_assignment(vec![0; days], vec![1], 0);
        let out = build_rp(&sys, &data, &rp, false).unwrap();
        let one_day = build_hm(&sys, &demand_profile(&sys, &day, 0.0), false).unwrap();
        let opts = SolverOptions::default();
        let a = HighsSolver.solve(&out.model, &opts).unwrap();
        let b = HighsSolver.solve(&one_day.model, &opts).unwrap();
        assert!((a.objective - days as f64 * b.objective).abs() < 1e-6 * b.objective);
    }

    #[test]
    fn two_periods_double_the_day_rows() {
        let sys = one_of_each();
        let full: Vec<f64> = (0..48).map(|h| if h < 24 { 4.0 } else { 6.0 }).collect();
        let data = demand_profile(&sys, &full, 0.0);
        let rp = RepPeriodClustering::from_assignment(vec![0, 1], vec![0, 1], 0);
        let out = build_rp(&sys, &data, &rp, false).unwrap();
        let day = build_hm(&sys, &demand_profile(&sys, &full[..24], 0.0), false).unwrap();
        assert_eq!(out.model.num_rows(), 2 * day.model.num_rows() + 2 * sys.storage.len());
        assert_eq!(out.model.num_vars(), 2 * day.model.num_vars());
    }

    #[test]
    fn infinite_threshold_leaves_only_checkpoints() {
        let sys = one_of_each();
        let full: Vec<f64> = (0..96).map(|h| if (h / 24) % 2 == 0 { 4.0 } else { 6.0 }).collect();
        let data = demand_profile(&sys, &full, 0.0);
        let rp = RepPeriodClustering::from_assignment(vec![0, 1, 0, 1], vec![0, 1], 0);
        let nrpp = build_rp_transition_matrix(&rp.day_assignment, 2);
        let options = TmciOptions {
            window: 24,
            link_threshold: f64::INFINITY,
            keep_daily_cycle: true,
        };
        let out = build_rp_tmci(&sys, &data, &rp, &nrpp, &options, false).unwrap();
        let plain = build_rp(&sys, &data, &rp, false).unwrap();
        assert!(out.link_rows.is_empty());
        assert_eq!(out.storage_checkpoints.len(), 4);
        assert_eq!(out.model.num_rows(), plain.model.num_rows() + 4);
        assert_eq!(out.model.num_vars(), plain.model.num_vars() + 4);
    }

    #[test]
    fn window_must_be_whole_days() {
        let sys = one_of_each();
        let data = demand_profile(&sys, &[4.0; 48], 0.0);
        let rp = RepPeriodClustering::from_assignment(vec![0, 0], vec![0], 0);
        let nrpp = build_rp_transition_matrix(&rp.day_assignment, 1);
        let options = TmciOptions {
            window: 36,
            ..TmciOptions::default()
        };
        assert!(matches!(
            build_rp_tmci(&sys, &data, &rp, &nrpp, &options, false),
            Err(FormulationError::BadWindow(36))
        ));
    }
}
