use std::io::Write;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::formulations::{FormulationKind, FormulationOutput};
use crate::milp::Solution;
use crate::system::PowerSystem;
use crate::HorizonData;

use super::prices::SlotPrices;
use super::{EvalError, TimeMap, VIOLATION_TOLERANCE};

/// A solved model laid out over the real hours of the horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct HourlyExpansion {
    pub kind: FormulationKind,
    pub thermal: Vec<String>,
    pub thermal_tech: Vec<String>,
    pub storage: Vec<String>,
    pub storage_tech: Vec<String>,
    pub nodes: Vec<String>,
    /// Real system demand per hour, GW.
    pub demand: Vec<f64>,
    /// Slot of the model that supplies each hour.
    pub slot: Vec<usize>,
    /// hour × thermal unit, GW
    pub production: Array2<f64>,
    pub commitment: Array2<f64>,
    /// hour × storage unit
    pub discharge: Array2<f64>,
    pub charge: Array2<f64>,
    pub spill: Array2<f64>,
    /// Level at the end of each hour rebuilt with the real hourly inflows.
    pub storage_level: Array2<f64>,
    /// Level at the end of each hour as the model itself sees it.
    pub modeled_level: Array2<f64>,
    /// hour × node
    pub renewable: Array2<f64>,
    pub curtailment: Array2<f64>,
    pub pns: Array2<f64>,
    /// hour × node, k€/GWh
    pub prices: Option<Array2<f64>>,
    pub price_degenerate: bool,
    /// Startups over the horizon per thermal unit.
    pub startups: Vec<f64>,
    /// GW per storage unit.
    pub investment: Vec<f64>,
    pub objective: f64,
    pub solve_seconds: f64,
}

impl HourlyExpansion {
    pub fn hours(&self) -> usize {
        self.slot.len()
    }

    /// Hourly system price: the mean over nodes.
    pub fn system_price(&self) -> Option<Vec<f64>> {
        self.prices.as_ref().map(|p| {
            p.rows()
                .into_iter()
                .map(|r| r.sum() / r.len().max(1) as f64)
                .collect()
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StorageViolation {
    pub unit: String,
    /// 0-based hour
    pub hour: usize,
    /// GWh outside the effective bounds (> 0).
    pub magnitude: f64,
    pub above: bool,
}

pub fn expand_hm(
    output: &FormulationOutput,
    solution: &Solution,
    system: &PowerSystem,
    data: &HorizonData,
    prices: Option<&SlotPrices>,
) -> Result<HourlyExpansion, EvalError> {
    expand(output, solution, system, data, TimeMap::Hourly, prices)
}

pub fn expand_ss(
    output: &FormulationOutput,
    solution: &Solution,
    system: &PowerSystem,
    data: &HorizonData,
    states: &crate::StateClustering,
    prices: Option<&SlotPrices>,
) -> Result<HourlyExpansion, EvalError> {
    expand(output, solution, system, data, TimeMap::States(states), prices)
}

pub fn expand_rp(
    output: &FormulationOutput,
    solution: &Solution,
    system: &PowerSystem,
    data: &HorizonData,
    rp: &crate::aggregation::RepPeriodClustering,
    prices: Option<&SlotPrices>,
) -> Result<HourlyExpansion, EvalError> {
    expand(output, solution, system, data, TimeMap::RepPeriods(rp), prices)
}

/// Every hour copies the values of its slot. Storage levels are rebuilt as
/// the model defines them: hour by hour (HM), through Δw along the state
/// chain (state models), per day from W0 (RP) or per window from the solved
/// checkpoint level (RP-TM&CI).
pub fn expand(
    output: &FormulationOutput,
    solution: &Solution,
    system: &PowerSystem,
    data: &HorizonData,
    map: TimeMap<'_>,
    prices: Option<&SlotPrices>,
) -> Result<HourlyExpansion, EvalError> {
    let kind = output.kind();
    if !map.fits(kind) {
        return Err(EvalError::WrongMap { kind });
    }
    if solution.values.is_empty() && output.model.num_vars() > 0 {
        return Err(EvalError::NoValues);
    }
    let hours = data.horizon_hours();
    let map_hours = match map {
        TimeMap::Hourly => hours,
        TimeMap::States(s) => s.horizon_hours(),
        TimeMap::RepPeriods(rp) => rp.horizon_hours(),
    };
    if map_hours != hours {
        return Err(EvalError::Horizon {
            map: map_hours,
            data: hours,
        });
    }
    let x = |v: crate::milp::VarId| solution.values[v.0];
    let slot = map.slots(hours);
    let (nt, nh, nn) = (system.thermal.len(), system.storage.len(), system.buses.len());

    // data behind each slot
    let availability = |p: usize, n: usize| -> f64 {
        match map {
            TimeMap::Hourly => data.renewable[[p, n]],
            TimeMap::States(s) => s.renewable(slot[p], n),
            TimeMap::RepPeriods(rp) => data.renewable[[rp.mapped_hour(p), n]],
        }
    };
    let model_inflow = |p: usize, h: usize| -> f64 {
        match map {
            TimeMap::Hourly => data.inflows[[p, h]],
            TimeMap::States(s) => s.inflow(slot[p], h),
            TimeMap::RepPeriods(rp) => data.inflows[[rp.mapped_hour(p), h]],
        }
    };

    let mut e = HourlyExpansion {
        kind,
        thermal: system.thermal.iter().map(|t| t.id.clone()).collect(),
        thermal_tech: system.thermal.iter().map(|t| t.tech.clone()).collect(),
        storage: system.storage.iter().map(|h| h.id.clone()).collect(),
        storage_tech: system.storage.iter().map(|h| h.tech.clone()).collect(),
        nodes: system.buses.iter().map(|b| b.id.clone()).collect(),
        demand: data.demand.rows().into_iter().map(|r| r.sum()).collect(),
        slot: slot.clone(),
        production: Array2::zeros((hours, nt)),
        commitment: Array2::zeros((hours, nt)),
        discharge: Array2::zeros((hours, nh)),
        charge: Array2::zeros((hours, nh)),
        spill: Array2::zeros((hours, nh)),
        storage_level: Array2::zeros((hours, nh)),
        modeled_level: Array2::zeros((hours, nh)),
        renewable: Array2::zeros((hours, nn)),
        curtailment: Array2::zeros((hours, nn)),
        pns: Array2::zeros((hours, nn)),
        prices: prices.map(|_| Array2::zeros((hours, nn))),
        price_degenerate: prices.is_some_and(|p| p.degenerate),
        startups: vec![0.0; nt],
        investment: output.investment_values(&solution.values),
        objective: solution.objective,
        solve_seconds: solution.seconds,
    };

    for (p, &s) in slot.iter().enumerate() {
        let pv = &output.periods[s];
        for i in 0..nt {
            e.production[[p, i]] = x(pv.q[i]);
            e.commitment[[p, i]] = x(pv.u[i]);
            if let Some(&y) = pv.y.get(i) {
                e.startups[i] += x(y);
            }
        }
        for i in 0..nh {
            e.discharge[[p, i]] = x(pv.q_storage[i]);
            e.charge[[p, i]] = x(pv.b[i]);
            e.spill[[p, i]] = x(pv.sp[i]);
        }
        for n in 0..nn {
            let v = x(pv.v[n]);
            e.renewable[[p, n]] = v;
            e.curtailment[[p, n]] = (availability(p, n) - v).max(0.0);
            e.pns[[p, n]] = x(pv.pns[n]);
        }
        if let (Some(out), Some(src)) = (e.prices.as_mut(), prices) {
            for n in 0..nn {
                out[[p, n]] = src.prices[s][n];
            }
        }
    }
    for pair in &output.pairs {
        for (i, &y) in pair.y.iter().enumerate() {
            e.startups[i] += pair.count as f64 * x(y);
        }
    }
    for (i, &y) in output.initial_startup.iter().enumerate() {
        e.startups[i] += x(y);
    }

    for (i, h) in system.storage.iter().enumerate() {
        let net = |p: usize, inflow: f64| {
            inflow + h.efficiency * e.charge[[p, i]] - e.discharge[[p, i]] - e.spill[[p, i]]
        };
        match kind {
            FormulationKind::Hm => {
                let mut level = h.w0;
                for p in 0..hours {
                    level += net(p, data.inflows[[p, i]]);
                    e.storage_level[[p, i]] = level;
                    e.modeled_level[[p, i]] = x(output.periods[p].w[i]);
                }
            }
            FormulationKind::Ss | FormulationKind::SsRfm => {
                let dw: std::collections::HashMap<(usize, usize), f64> = output
                    .pairs
                    .iter()
                    .map(|pr| ((pr.from, pr.to), x(pr.delta_w[i])))
                    .collect();
                let (mut real, mut modeled) = (h.w0, h.w0);
                e.storage_level[[0, i]] = real;
                e.modeled_level[[0, i]] = modeled;
                for p in 1..hours {
                    real += 0.5 * (net(p - 1, data.inflows[[p - 1, i]]) + net(p, data.inflows[[p, i]]));
                    modeled += dw
                        .get(&(slot[p - 1], slot[p]))
                        .ok_or(EvalError::MissingTransition(slot[p - 1], slot[p]))?;
                    e.storage_level[[p, i]] = real;
                    e.modeled_level[[p, i]] = modeled;
                }
            }
            FormulationKind::Rp => {
                let TimeMap::RepPeriods(rp) = map else { unreachable!() };
                let len = rp.periods_per_rp;
                let mut level = h.w0;
                for p in 0..hours {
                    if p % len == 0 {
                        level = h.w0;
                    }
                    level += net(p, data.inflows[[p, i]]);
                    e.storage_level[[p, i]] = level;
                    e.modeled_level[[p, i]] = x(output.periods[slot[p]].w[i]);
                }
            }
            FormulationKind::RpTmci => {
                let mut start = 0;
                let mut anchor = h.w0;
                for cp in &output.storage_checkpoints {
                    let (mut real, mut modeled) = (anchor, anchor);
                    for p in start..cp.hour {
                        real += net(p, data.inflows[[p, i]]);
                        modeled += net(p, model_inflow(p, i));
                        e.storage_level[[p, i]] = real;
                        e.modeled_level[[p, i]] = modeled;
                    }
                    anchor = x(cp.w[i]);
                    start = cp.hour;
                }
            }
        }
    }
    Ok(e)
}

/// Hours where a rebuilt storage level leaves its bounds (including the
/// invested energy capacity) by more than [`VIOLATION_TOLERANCE`].
pub fn detect_violations(expansion: &HourlyExpansion, system: &PowerSystem) -> Vec<StorageViolation> {
    let mut out = Vec::new();
    for (i, h) in system.storage.iter().enumerate() {
        let (lo, up) = h.energy_bounds(expansion.investment.get(i).copied().unwrap_or(0.0));
        for (p, &level) in expansion.storage_level.column(i).iter().enumerate() {
            if level > up + VIOLATION_TOLERANCE {
                out.push(StorageViolation {
                    unit: h.id.clone(),
                    hour: p,
                    magnitude: level - up,
                    above: true,
                });
            } else if level < lo - VIOLATION_TOLERANCE {
                out.push(StorageViolation {
                    unit: h.id.clone(),
                    hour: p,
                    magnitude: lo - level,
                    above: false,
                });
            }
        }
    }
    out
}

/// One row per hour, one column per quantity and unit.
pub fn write_hourly_csv<W: Write>(expansion: &HourlyExpansion, writer: W) -> Result<(), EvalError> {
    let e = expansion;
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["hour".to_string()];
    for t in &e.thermal {
        header.push(format!("q_{t}"));
        header.push(format!("u_{t}"));
    }
    for h in &e.storage {
        for f in ["discharge", "charge", "spill", "level", "modeled_level"] {
            header.push(format!("{f}_{h}"));
        }
    }
    for n in &e.nodes {
        for f in ["renewable", "curtailment", "pns"] {
            header.push(format!("{f}_{n}"));
        }
        if e.prices.is_some() {
            header.push(format!("price_{n}"));
        }
    }
    w.write_record(&header)?;
    for p in 0..e.hours() {
        let mut row = vec![(p + 1).to_string()];
        for i in 0..e.thermal.len() {
            row.push(e.production[[p, i]].to_string());
            row.push(e.commitment[[p, i]].round().to_string());
        }
        for i in 0..e.storage.len() {
            for m in [&e.discharge, &e.charge, &e.spill, &e.storage_level, &e.modeled_level] {
                row.push(m[[p, i]].to_string());
            }
        }
        for n in 0..e.nodes.len() {
            for m in [&e.renewable, &e.curtailment, &e.pns] {
                row.push(m[[p, n]].to_string());
            }
            if let Some(pr) = &e.prices {
                row.push(pr[[p, n]].to_string());
            }
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}
