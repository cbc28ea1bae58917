//! Small systems shared by the builder tests.

use ndarray::Array2;

use crate::system::PowerSystem;
use crate::HorizonData;

/// One bus, one thermal unit, one short-term storage unit.
pub(crate) fn one_of_each() -> PowerSystem {
    PowerSystem::from_json(
        r#"{
        "buses": [{"id": "N1", "slack": true}],
        "thermal": [{"id": "G1", "bus": "N1", "fuel_cost": 1.0, "alpha": 10.0,
                     "beta": 5.0, "gamma": 20.0, "om_cost": 0.0, "q_max": 10.0,
                     "q_min": 2.0, "ramp_10min": 10.0}],
        "storage": [{"id": "H1", "bus": "N1", "kind": "short_term", "w0": 5.0,
                     "w_max": 10.0, "w_min": 0.0, "w_fin": 5.0, "q_max": 2.0,
                     "b_max": 2.0, "inv_cost": 100.0, "epr_max": 4.0}],
        "config": {"pns_penalty": 1000.0}
    }"#,
    )
    .unwrap()
}

pub(crate) fn flat_data(
    sys: &PowerSystem,
    hours: usize,
    demand: f64,
    renewable: f64,
    inflow: f64,
) -> HorizonData {
    let n = sys.buses.len();
    let h = sys.storage.len();
    // built directly: the toy horizons are shorter than a day
    HorizonData {
        nodes: sys.buses.iter().map(|b| b.id.clone()).collect(),
        storage_units: sys.storage.iter().map(|s| s.id.clone()).collect(),
        demand: Array2::from_elem((hours, n), demand),
        renewable: Array2::from_elem((hours, n), renewable),
        inflows: Array2::from_elem((hours, h), inflow),
    }
}

/// Data with the given per-hour demand on a single-bus system.
pub(crate) fn demand_profile(sys: &PowerSystem, demand: &[f64], inflow: f64) -> HorizonData {
    let h = sys.storage.len();
    HorizonData {
        nodes: vec![sys.buses[0].id.clone()],
        storage_units: sys.storage.iter().map(|s| s.id.clone()).collect(),
        demand: Array2::from_shape_vec((demand.len(), 1), demand.to_vec()).unwrap(),
        renewable: Array2::zeros((demand.len(), 1)),
        inflows: Array2::from_elem((demand.len(), h), inflow),
    }
}
