#![allow(dead_code)]

use std::collections::BTreeMap;

use ndarray::Array2;
use timerep::system::{Bus, OperatingConfig, PowerSystem, StorageKind, StorageUnit, ThermalUnit};
use timerep::HorizonData;

/// Unit with cost terms given directly: fuel cost 1 so that α, β and γ are
/// the marginal, no-load and startup costs.
pub fn thermal(id: &str, marginal: f64, no_load: f64, startup: f64, q_min: f64, q_max: f64) -> ThermalUnit {
    ThermalUnit {
        id: id.into(),
        bus: "N1".into(),
        tech: id.into(),
        fuel_cost: 1.0,
        alpha: marginal,
        beta: no_load,
        gamma: startup,
        om_cost: 0.0,
        q_max,
        q_min,
        ramp_10min: q_max,
    }
}

#[derive(Clone, Copy)]
pub struct Store {
    pub w0: f64,
    pub w_min: f64,
    pub w_max: f64,
    pub w_fin: f64,
    pub eta: f64,
    pub q_max: f64,
    pub b_max: f64,
}

impl Default for Store {
    fn default() -> Self {
        Self {
            w0: 0.0,
            w_min: 0.0,
            w_max: 10.0,
            w_fin: 0.0,
            eta: 1.0,
            q_max: 1.0,
            b_max: 1.0,
        }
    }
}

pub fn storage(id: &str, kind: StorageKind, s: Store) -> StorageUnit {
    StorageUnit {
        id: id.into(),
        bus: "N1".into(),
        kind,
        tech: id.into(),
        w0: s.w0,
        w_max: s.w_max,
        w_min: s.w_min,
        w_fin: s.w_fin,
        efficiency: s.eta,
        q_max: s.q_max,
        b_max: s.b_max,
        inv_cost: 0.0,
        epr_max: 0.0,
        epr_min: 0.0,
        investable: false,
    }
}

pub fn single_bus(thermal: Vec<ThermalUnit>, storage: Vec<StorageUnit>) -> PowerSystem {
    PowerSystem {
        buses: vec![Bus {
            id: "N1".into(),
            slack: true,
        }],
        circuits: Vec::new(),
        isf: None,
        thermal,
        storage,
        config: OperatingConfig {
            reserve_fraction: 0.0,
            pns_penalty: 1000.0,
            spill_penalty: 0.0,
            initial_commitment: BTreeMap::new(),
        },
        renewables: Vec::new(),
    }
}

/// Single-bus data. `inflow[h]` is the hourly series of storage unit `h`;
/// a missing series is zero. Built directly so toy horizons may be shorter
/// than a day.
pub fn horizon(sys: &PowerSystem, demand: &[f64], renewable: &[f64], inflow: &[Vec<f64>]) -> HorizonData {
    let p = demand.len();
    let nh = sys.storage.len();
    HorizonData {
        nodes: vec!["N1".into()],
        storage_units: sys.storage.iter().map(|s| s.id.clone()).collect(),
        demand: Array2::from_shape_vec((p, 1), demand.to_vec()).unwrap(),
        renewable: if renewable.is_empty() {
            Array2::zeros((p, 1))
        } else {
            Array2::from_shape_vec((p, 1), renewable.to_vec()).unwrap()
        },
        inflows: Array2::from_shape_fn((p, nh), |(t, h)| inflow.get(h).map_or(0.0, |s| s[t])),
    }
}

/// Cheapest dispatch of committed units on one bus without storage or
/// reserves: minimum outputs first, then merit order, shortfall as pns.
/// `None` when the minimum outputs exceed what demand and curtailable
/// renewables can absorb.
pub fn dispatch_cost(units: &[ThermalUnit], on: &[bool], demand: f64, renewable: f64, pns_penalty: f64) -> Option<f64> {
    let mut cost = 0.0;
    let mut must_run = 0.0;
    let mut headroom: Vec<(f64, f64)> = Vec::new();
    for (t, &u) in units.iter().zip(on) {
        if u {
            cost += t.no_load_cost() + t.marginal_cost() * t.q_min;
            must_run += t.q_min;
            headroom.push((t.marginal_cost(), t.q_max - t.q_min));
        }
    }
    if must_run > demand + 1e-12 {
        return None;
    }
    let mut rest = (demand - must_run - renewable).max(0.0);
    headroom.sort_by(|a, b| a.0.total_cmp(&b.0));
    for (mc, room) in headroom {
        let take = rest.min(room);
        cost += mc * take;
        rest -= take;
    }
    Some(cost + pns_penalty * rest)
}

/// Exhaustive search over all commitment patterns of a storage-free,
/// single-bus system, with startups charged against the initial commitment.
pub fn brute_force_uc(sys: &PowerSystem, demand: &[f64], renewable: &[f64]) -> f64 {
    let nt = sys.thermal.len();
    let p = demand.len();
    let bits = nt * p;
    assert!(bits <= 20, "pattern space too large");
    let u0: Vec<bool> = sys.thermal.iter().map(|t| sys.initial_commitment(t) > 0.5).collect();
    let mut best = f64::INFINITY;
    'patterns: for mask in 0u64..(1 << bits) {
        let on = |h: usize, t: usize| mask >> (h * nt + t) & 1 == 1;
        let mut cost = 0.0;
        for h in 0..p {
            let state: Vec<bool> = (0..nt).map(|t| on(h, t)).collect();
            let r = renewable.get(h).copied().unwrap_or(0.0);
            match dispatch_cost(&sys.thermal, &state, demand[h], r, sys.config.pns_penalty) {
                Some(c) => cost += c,
                None => continue 'patterns,
            }
            for (t, unit) in sys.thermal.iter().enumerate() {
                let before = if h == 0 { u0[t] } else { on(h - 1, t) };
                if state[t] && !before {
                    cost += unit.startup_cost();
                }
            }
        }
        best = best.min(cost);
    }
    best
}

/// Two days of surplus then one of deficit: windowed bounds anchored at W0
/// let the real level run above the ceiling on the second day.
pub fn windowed_overshoot() -> (PowerSystem, HorizonData, Vec<usize>) {
    let mut sys = single_bus(
        vec![thermal("G1", 50.0, 0.0, 0.0, 0.0, 5.0)],
        vec![storage(
            "B1",
            StorageKind::ShortTerm,
            Store {
                w0: 2.0,
                w_max: 10.0,
                w_fin: 0.0,
                q_max: 1.0,
                b_max: 0.0,
                ..Store::default()
            },
        )],
    );
    sys.config.spill_penalty = 100.0;
    let assignment: Vec<usize> = (0..72).map(|p| (p >= 48) as usize).collect();
    let demand: Vec<f64> = assignment.iter().map(|&s| s as f64).collect();
    let inflow: Vec<f64> = assignment.iter().map(|&s| if s == 0 { 0.2 } else { 0.0 }).collect();
    let data = horizon(&sys, &demand, &[], &[inflow]);
    (sys, data, assignment)
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-12)
}
