//! Per-slot unit commitment block shared by all formulations: thermal
//! dispatch and commitment, reserves, renewable use, storage power, network
//! flows and the demand balance.

use crate::milp::{Key, MilpModel, RowSense, VarId};
use crate::system::{Network, PowerSystem, StorageUnit};
use crate::HorizonData;

use super::{FormulationError, PeriodVars};

/// Exogenous data of one slot, in physical units.
#[derive(Debug, Clone)]
pub(crate) struct PeriodInput {
    pub demand: Vec<f64>,
    pub renewable: Vec<f64>,
    pub inflow: Vec<f64>,
    /// Real hours represented; multiplies every operating cost.
    pub weight: f64,
}

impl PeriodInput {
    pub fn hour(data: &HorizonData, hour: usize, weight: f64) -> Self {
        Self {
            demand: data.demand.row(hour).to_vec(),
            renewable: data.renewable.row(hour).to_vec(),
            inflow: data.inflows.row(hour).to_vec(),
            weight,
        }
    }
}

/// Slot indices prepended to every key, e.g. `[("p", "17")]`.
pub(crate) type Slot = Vec<(&'static str, String)>;

pub(crate) fn key(symbol: &str, slot: &Slot) -> Key {
    slot.iter()
        .fold(Key::new(symbol), |k, (name, value)| k.at(name, value))
}

pub(crate) struct Operational<'a> {
    pub system: &'a PowerSystem,
    network: Network,
    thermal_bus: Vec<usize>,
    storage_bus: Vec<usize>,
    /// Investment variable per storage unit.
    pub investment: Vec<Option<VarId>>,
}

impl<'a> Operational<'a> {
    /// Resolve the network and declare the investment variables.
    pub fn new(
        system: &'a PowerSystem,
        model: &mut MilpModel,
        invest: bool,
    ) -> Result<Self, FormulationError> {
        let network = system.network()?;
        let bus = |unit: &str, id: &str| {
            system.bus_index(id).ok_or_else(|| {
                FormulationError::Dimensions(format!("unit `{unit}` sits on unknown bus `{id}`"))
            })
        };
        let thermal_bus = system
            .thermal
            .iter()
            .map(|t| bus(&t.id, &t.bus))
            .collect::<Result<_, _>>()?;
        let storage_bus = system
            .storage
            .iter()
            .map(|h| bus(&h.id, &h.bus))
            .collect::<Result<_, _>>()?;
        let investment = system
            .storage
            .iter()
            .map(|h| {
                (invest && h.investable).then(|| {
                    model.add_continuous(Key::new("x").at("h", &h.id), 0.0, f64::INFINITY, h.inv_cost)
                })
            })
            .collect();
        Ok(Self {
            system,
            network,
            thermal_bus,
            storage_bus,
            investment,
        })
    }

    pub fn check_hourly_data(&self, data: &HorizonData) -> Result<(), FormulationError> {
        let nodes: Vec<&str> = self.system.buses.iter().map(|b| b.id.as_str()).collect();
        let units: Vec<&str> = self.system.storage.iter().map(|h| h.id.as_str()).collect();
        if data.nodes != nodes {
            return Err(FormulationError::Dimensions(format!(
                "data nodes {:?} differ from system buses {:?}",
                data.nodes, nodes
            )));
        }
        if data.storage_units != units {
            return Err(FormulationError::Dimensions(format!(
                "data storage columns {:?} differ from system storage {:?}",
                data.storage_units, units
            )));
        }
        Ok(())
    }

    pub fn check_sizes(&self, nodes: usize, storage: usize) -> Result<(), FormulationError> {
        if nodes != self.system.buses.len() || storage != self.system.storage.len() {
            return Err(FormulationError::Dimensions(format!(
                "aggregated data has {nodes} nodes and {storage} storage units, system has {} and {}",
                self.system.buses.len(),
                self.system.storage.len()
            )));
        }
        Ok(())
    }

    /// Declare the operational variables and rows of one slot. Startups and
    /// storage levels are left to the caller.
    pub fn add_period(&self, model: &mut MilpModel, slot: &Slot, input: &PeriodInput) -> PeriodVars {
        let sys = self.system;
        let wgt = input.weight;
        let mut pv = PeriodVars::default();
        for t in &sys.thermal {
            let k = |s: &str| key(s, slot).at("t", &t.id);
            let q = model.add_continuous(k("q"), 0.0, f64::INFINITY, wgt * t.marginal_cost());
            let qh = model.add_continuous(k("qhat"), 0.0, f64::INFINITY, 0.0);
            let u = model.add_binary(k("u"), wgt * t.no_load_cost());
            let r = model.add_continuous(k("r"), 0.0, t.ramp_10min, 0.0);
            model.add_row(k("output_split"), [(q, 1.0), (u, -t.q_min), (qh, -1.0)], RowSense::Eq, 0.0);
            model.add_row(k("output_max"), [(qh, 1.0), (u, -(t.q_max - t.q_min))], RowSense::Le, 0.0);
            model.add_row(k("reserve_headroom"), [(r, 1.0), (q, 1.0), (u, -t.q_max)], RowSense::Le, 0.0);
            pv.q.push(q);
            pv.q_above_min.push(qh);
            pv.u.push(u);
            pv.r.push(r);
        }
        for (i, h) in sys.storage.iter().enumerate() {
            let k = |s: &str| key(s, slot).at("h", &h.id);
            let x = self.investment[i];
            let (qmax, bmax) = if x.is_some() {
                (f64::INFINITY, f64::INFINITY)
            } else {
                (h.q_max, h.b_max)
            };
            let qs = model.add_continuous(k("qh"), 0.0, qmax, 0.0);
            let b = model.add_continuous(k("b"), 0.0, bmax, 0.0);
            let sp = model.add_continuous(k("sp"), 0.0, f64::INFINITY, wgt * sys.config.spill_penalty);
            if let Some(x) = x {
                model.add_row(k("discharge_max"), [(qs, 1.0), (x, -1.0)], RowSense::Le, h.q_max);
                model.add_row(k("charge_max"), [(b, 1.0), (x, -h.efficiency)], RowSense::Le, h.b_max);
            }
            pv.q_storage.push(qs);
            pv.b.push(b);
            pv.sp.push(sp);
        }
        for (n, bus) in sys.buses.iter().enumerate() {
            let k = |s: &str| key(s, slot).at("n", &bus.id);
            pv.v.push(model.add_continuous(k("v"), 0.0, input.renewable[n], 0.0));
            pv.pns.push(model.add_continuous(k("pns"), 0.0, f64::INFINITY, wgt * sys.config.pns_penalty));
        }

        // injection terms of each node
        let mut inj: Vec<Vec<(VarId, f64)>> = vec![Vec::new(); sys.buses.len()];
        for (i, &n) in self.thermal_bus.iter().enumerate() {
            inj[n].push((pv.q[i], 1.0));
        }
        for (i, &n) in self.storage_bus.iter().enumerate() {
            inj[n].push((pv.q_storage[i], 1.0));
            inj[n].push((pv.b[i], -1.0));
        }
        for n in 0..sys.buses.len() {
            inj[n].push((pv.v[n], 1.0));
            inj[n].push((pv.pns[n], 1.0));
        }

        for (c, circuit) in sys.circuits.iter().enumerate() {
            let cap = self.network.capacity[c];
            let pf = model.add_continuous(key("pf", slot).at("c", &circuit.id), -cap, cap, 0.0);
            let mut coefs = vec![(pf, 1.0)];
            let mut rhs = 0.0;
            for (n, terms) in inj.iter().enumerate() {
                let f = self.network.isf[c][n];
                if f != 0.0 {
                    coefs.extend(terms.iter().map(|&(v, a)| (v, -f * a)));
                    rhs -= f * input.demand[n];
                }
            }
            model.add_row(key("flow", slot).at("c", &circuit.id), coefs, RowSense::Eq, rhs);
            pv.pf.push(pf);
        }

        for (n, bus) in sys.buses.iter().enumerate() {
            let mut coefs = inj[n].clone();
            for (c, &(from, to)) in self.network.ends.iter().enumerate() {
                if to == n {
                    coefs.push((pv.pf[c], 1.0));
                }
                if from == n {
                    coefs.push((pv.pf[c], -1.0));
                }
            }
            pv.balance.push(model.add_row(
                key("balance", slot).at("n", &bus.id),
                coefs,
                RowSense::Eq,
                input.demand[n],
            ));
        }

        let total_demand: f64 = input.demand.iter().sum();
        model.add_row(
            key("reserve_requirement", slot),
            pv.r.iter().map(|&r| (r, 1.0)),
            RowSense::Ge,
            sys.config.reserve_fraction * total_demand,
        );
        pv
    }

    /// Hourly startup `u − u_prev ≤ y`; `prev = None` compares with the
    /// initial commitment.
    pub fn add_startups(
        &self,
        model: &mut MilpModel,
        slot: &Slot,
        pv: &mut PeriodVars,
        prev: Option<&[VarId]>,
        weight: f64,
    ) {
        for (i, t) in self.system.thermal.iter().enumerate() {
            let k = |s: &str| key(s, slot).at("t", &t.id);
            let y = model.add_binary(k("y"), weight * t.startup_cost());
            let u = pv.u[i];
            match prev {
                Some(prev) => model.add_row(k("startup"), [(u, 1.0), (prev[i], -1.0), (y, -1.0)], RowSense::Le, 0.0),
                None => model.add_row(
                    k("startup"),
                    [(u, 1.0), (y, -1.0)],
                    RowSense::Le,
                    self.system.initial_commitment(t),
                ),
            };
            pv.y.push(y);
        }
    }

    /// Storage level after the slot: `w = w_prev + I − q − sp + η b`, with
    /// `prev = None` meaning the level before is `W0`. `floor` raises the
    /// lower bound (terminal level).
    pub fn add_levels(
        &self,
        model: &mut MilpModel,
        slot: &Slot,
        pv: &mut PeriodVars,
        prev: Option<&[VarId]>,
        inflow: &[f64],
        floor: impl Fn(&StorageUnit) -> Option<f64>,
    ) {
        for (i, h) in self.system.storage.iter().enumerate() {
            let k = |s: &str| key(s, slot).at("h", &h.id);
            let w = self.add_level_var(model, k("w"), i, floor(h));
            let mut coefs = vec![(w, 1.0), (pv.q_storage[i], 1.0), (pv.sp[i], 1.0), (pv.b[i], -h.efficiency)];
            let mut rhs = inflow[i];
            match prev {
                Some(prev) => coefs.push((prev[i], -1.0)),
                None => rhs += h.w0,
            }
            pv.storage_balance.push(model.add_row(k("storage_level"), coefs, RowSense::Eq, rhs));
            pv.w.push(w);
        }
    }

    /// A storage level variable within its energy limits, which grow with
    /// the investment when one is declared.
    pub fn add_level_var(&self, model: &mut MilpModel, k: Key, unit: usize, floor: Option<f64>) -> VarId {
        let h = &self.system.storage[unit];
        let lower = floor.map_or(h.w_min, |f| f.max(h.w_min));
        match self.investment[unit] {
            None => model.add_continuous(k, lower, h.w_max, 0.0),
            Some(x) => {
                let w = model.add_continuous(k.clone(), lower, f64::INFINITY, 0.0);
                let mut up = k.clone();
                up.symbol = format!("{}_max", k.symbol);
                model.add_row(up, [(w, 1.0), (x, -h.epr_max)], RowSense::Le, h.w_max);
                if h.epr_min != 0.0 {
                    let mut lo = k.clone();
                    lo.symbol = format!("{}_min", k.symbol);
                    model.add_row(lo, [(w, 1.0), (x, -h.epr_min)], RowSense::Ge, h.w_min);
                }
                w
            }
        }
    }
}
