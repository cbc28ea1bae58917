use crate::aggregation::{TransitionCounts, TransitionMatrices};
use crate::milp::{Key, MilpModel, RowSense, VarId};
use crate::system::{PowerSystem, StorageKind};
use crate::StateClustering;

use super::operational::{key, Operational, PeriodInput, Slot};
use super::{
    CheckpointRows, FormulationError, FormulationKind, FormulationMeta, FormulationOutput, StatePair,
};

/// System states model: one slot per state weighted by its hour count,
/// startups on state transitions, storage tracked through Δw and the
/// cumulative frequency matrices at every checkpoint.
pub fn build_ss(
    system: &PowerSystem,
    states: &StateClustering,
    matrices: &TransitionMatrices,
    invest: bool,
) -> Result<FormulationOutput, FormulationError> {
    build_states(system, states, matrices, invest, FormulationKind::Ss)
}

/// As [`build_ss`], but short-term units are bounded per window between
/// consecutive checkpoints (reduced frequency matrices) instead of
/// cumulatively.
pub fn build_ss_rfm(
    system: &PowerSystem,
    states: &StateClustering,
    matrices: &TransitionMatrices,
    invest: bool,
) -> Result<FormulationOutput, FormulationError> {
    build_states(system, states, matrices, invest, FormulationKind::SsRfm)
}

fn state_slot(s: usize) -> Slot {
    vec![("s", (s + 1).to_string())]
}

fn build_states(
    system: &PowerSystem,
    states: &StateClustering,
    matrices: &TransitionMatrices,
    invest: bool,
    kind: FormulationKind,
) -> Result<FormulationOutput, FormulationError> {
    let horizon = states.horizon_hours();
    if matrices.checkpoints.last() != Some(&horizon) {
        return Err(FormulationError::MissingFinalCheckpoint {
            horizon,
            last: matrices.checkpoints.last().copied(),
        });
    }
    if matrices.transitions.size != states.num_states
        || matrices.frequency.len() != matrices.checkpoints.len()
        || matrices.reduced_frequency.len() != matrices.checkpoints.len()
    {
        return Err(FormulationError::Dimensions(
            "transition matrices do not match the state clustering".into(),
        ));
    }
    let mut model = MilpModel::new(kind.stem().to_ascii_uppercase());
    let op = Operational::new(system, &mut model, invest)?;
    op.check_sizes(states.num_nodes, states.num_storage)?;

    let inputs: Vec<PeriodInput> = (0..states.num_states)
        .map(|s| PeriodInput {
            demand: (0..states.num_nodes).map(|n| states.demand(s, n)).collect(),
            renewable: (0..states.num_nodes).map(|n| states.renewable(s, n)).collect(),
            inflow: (0..states.num_storage).map(|h| states.inflow(s, h)).collect(),
            weight: states.durations[s] as f64,
        })
        .collect();
    let periods: Vec<_> = inputs
        .iter()
        .enumerate()
        .map(|(s, input)| op.add_period(&mut model, &state_slot(s), input))
        .collect();

    // startups on transitions between distinct states
    let mut pairs = Vec::new();
    for ((a, b), n) in matrices.transitions.iter() {
        let mut y = Vec::new();
        if a != b {
            for (i, t) in system.thermal.iter().enumerate() {
                let k = |sym: &str| {
                    Key::new(sym)
                        .at("from", a + 1)
                        .at("to", b + 1)
                        .at("t", &t.id)
                };
                let yv = model.add_binary(k("y"), n as f64 * t.startup_cost());
                model.add_row(
                    k("startup"),
                    [(periods[b].u[i], 1.0), (periods[a].u[i], -1.0), (yv, -1.0)],
                    RowSense::Le,
                    0.0,
                );
                y.push(yv);
            }
        }
        // central difference of the net storage gain of the two states
        let mut delta_w = Vec::new();
        let mut delta_w_rows = Vec::new();
        for (i, h) in system.storage.iter().enumerate() {
            let k = |sym: &str| Key::new(sym).at("from", a + 1).at("to", b + 1).at("h", &h.id);
            let dw = model.add_continuous(k("dw"), f64::NEG_INFINITY, f64::INFINITY, 0.0);
            let mut coefs = vec![(dw, 1.0)];
            for s in [a, b] {
                coefs.push((periods[s].b[i], -0.5 * h.efficiency));
                coefs.push((periods[s].q_storage[i], 0.5));
                coefs.push((periods[s].sp[i], 0.5));
            }
            let rhs = 0.5 * (inputs[a].inflow[i] + inputs[b].inflow[i]);
            delta_w_rows.push(model.add_row(k("delta_w"), coefs, RowSense::Eq, rhs));
            delta_w.push(dw);
        }
        pairs.push(StatePair {
            from: a,
            to: b,
            count: n,
            y,
            delta_w,
            delta_w_rows,
        });
    }

    // startup of the first hour against the initial commitment
    let first = states.assignment[0];
    let initial_startup: Vec<VarId> = system
        .thermal
        .iter()
        .enumerate()
        .map(|(i, t)| {
            let y0 = model.add_binary(Key::new("y0").at("t", &t.id), t.startup_cost());
            model.add_row(
                Key::new("startup0").at("t", &t.id),
                [(periods[first].u[i], 1.0), (y0, -1.0)],
                RowSense::Le,
                system.initial_commitment(t),
            );
            y0
        })
        .collect();

    let dw_terms = |counts: &TransitionCounts, unit: usize| -> Vec<(VarId, f64)> {
        pairs
            .iter()
            .filter_map(|p| {
                let c = counts.get(p.from, p.to);
                (c > 0).then(|| (p.delta_w[unit], c as f64))
            })
            .collect()
    };

    let mut checkpoint_rows = Vec::new();
    for (i, h) in system.storage.iter().enumerate() {
        let x = op.investment[i];
        let with_x = |mut terms: Vec<(VarId, f64)>, epr: f64| {
            if let Some(x) = x {
                terms.push((x, -epr));
            }
            terms
        };
        let unit_key = |sym: &str| Key::new(sym).at("h", &h.id);

        // level at the end of the horizon
        let total = dw_terms(&matrices.transitions, i);
        model.add_row(
            unit_key("final_level_min"),
            with_x(total.clone(), h.epr_min),
            RowSense::Ge,
            h.w_fin - h.w0,
        );
        model.add_row(
            unit_key("final_level_max"),
            with_x(total, h.epr_max),
            RowSense::Le,
            h.w_max - h.w0,
        );

        let windowed = kind == FormulationKind::SsRfm && h.kind == StorageKind::ShortTerm;
        let mats = if windowed {
            &matrices.reduced_frequency
        } else {
            &matrices.frequency
        };
        for (&hour, counts) in matrices.checkpoints.iter().zip(mats) {
            let terms = dw_terms(counts, i);
            if terms.is_empty() {
                continue;
            }
            let slot: Slot = vec![("k", hour.to_string())];
            let k = |sym: &str| key(sym, &slot).at("h", &h.id);
            let lower = model.add_row(
                k("checkpoint_min"),
                with_x(terms.clone(), h.epr_min),
                RowSense::Ge,
                h.w_min - h.w0,
            );
            let upper = model.add_row(
                k("checkpoint_max"),
                with_x(terms, h.epr_max),
                RowSense::Le,
                h.w_max - h.w0,
            );
            checkpoint_rows.push(CheckpointRows {
                hour,
                unit: i,
                windowed,
                lower: Some(lower),
                upper: Some(upper),
            });
        }
    }

    let mut notes = vec![format!(
        "{} checkpoints every {} h",
        matrices.checkpoints.len(),
        matrices.window
    )];
    if kind == FormulationKind::SsRfm {
        notes.push("short-term units bounded per window, long-term units cumulatively".into());
    }
    let investment = op.investment.clone();
    let mut out = FormulationOutput::new(
        model,
        FormulationMeta {
            kind,
            axis: kind.axis(),
            invest,
            num_periods: states.num_states,
            notes,
        },
    );
    out.weights = inputs.iter().map(|i| i.weight).collect();
    out.periods = periods;
    out.investment = investment;
    out.pairs = pairs;
    out.initial_startup = initial_startup;
    out.checkpoint_rows = checkpoint_rows;
    Ok(out)
}
