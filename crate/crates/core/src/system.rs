//! Physical and economic description of the power system.
//!
//! The system file is a JSON document with the sections `buses`, `circuits`,
//! `isf` (optional), `thermal`, `storage`, `config` and an optional
//! `renewables` list of installed plants (metadata only; hourly availability
//! comes from `renewables.csv`). Units: costs in k€, energy in GWh, power in
//! GW, fuel in MJ.

use std::collections::{BTreeMap, HashMap, HashSet, VecDeque};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Scalar;
use crate::timeseries::{ColumnSchema, TimeHorizonData};

#[derive(Debug, Error)]
pub enum SystemError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("system file: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("network must have exactly one slack bus, found {0}")]
    SlackCount(usize),
    #[error("circuit `{0}` references unknown bus `{1}`")]
    UnknownBus(String, String),
    #[error("circuit `{0}` needs a positive reactance to compute shift factors")]
    BadReactance(String),
    #[error("network is disconnected: bus `{0}` cannot reach the slack")]
    Disconnected(String),
    #[error("susceptance matrix is singular")]
    Singular,
    #[error("shift factor table has no row for circuit `{0}`")]
    MissingIsfRow(String),
}

fn default_thermal_tech() -> String {
    "thermal".into()
}

fn default_storage_tech() -> String {
    "storage".into()
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThermalUnit {
    pub id: String,
    pub bus: String,
    /// Technology tag used to group results (nuclear, coal, ccgt, ...).
    #[serde(default = "default_thermal_tech")]
    pub tech: String,
    /// k€/MJ
    pub fuel_cost: f64,
    /// MJ/GWh
    pub alpha: f64,
    /// MJ per committed hour
    pub beta: f64,
    /// MJ per startup
    pub gamma: f64,
    /// k€/GWh
    pub om_cost: f64,
    pub q_max: f64,
    pub q_min: f64,
    /// Maximum 10-minute ramp, the bound on spinning reserve.
    pub ramp_10min: f64,
}

impl ThermalUnit {
    /// Cost of one GWh above the fixed term, k€/GWh.
    pub fn marginal_cost(&self) -> f64 {
        self.fuel_cost * self.alpha + self.om_cost
    }

    pub fn no_load_cost(&self) -> f64 {
        self.fuel_cost * self.beta
    }

    pub fn startup_cost(&self) -> f64 {
        self.fuel_cost * self.gamma
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StorageKind {
    ShortTerm,
    LongTerm,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StorageUnit {
    pub id: String,
    pub bus: String,
    pub kind: StorageKind,
    #[serde(default = "default_storage_tech")]
    pub tech: String,
    pub w0: f64,
    pub w_max: f64,
    pub w_min: f64,
    pub w_fin: f64,
    #[serde(default = "one")]
    pub efficiency: f64,
    pub q_max: f64,
    pub b_max: f64,
    /// k€/GW over the modeled horizon
    #[serde(default)]
    pub inv_cost: f64,
    #[serde(default)]
    pub epr_max: f64,
    #[serde(default)]
    pub epr_min: f64,
    #[serde(default)]
    pub investable: bool,
}

impl StorageUnit {
    /// Energy bounds once `investment` GW have been added.
    pub fn energy_bounds(&self, investment: f64) -> (f64, f64) {
        (
            self.w_min + self.epr_min * investment,
            self.w_max + self.epr_max * investment,
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bus {
    pub id: String,
    #[serde(default)]
    pub slack: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Circuit {
    pub id: String,
    pub from: String,
    pub to: String,
    /// GW, applies in both directions
    pub capacity: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reactance: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperatingConfig {
    #[serde(default)]
    pub reserve_fraction: f64,
    /// k€/GWh of energy not served
    pub pns_penalty: f64,
    /// k€/GWh of storage spillage
    #[serde(default)]
    pub spill_penalty: f64,
    /// Commitment of each thermal unit in the hour before the horizon; units
    /// not listed start off.
    #[serde(default)]
    pub initial_commitment: BTreeMap<String, u8>,
}

impl Default for OperatingConfig {
    fn default() -> Self {
        Self {
            reserve_fraction: 0.0,
            pns_penalty: 10_000.0,
            spill_penalty: 0.0,
            initial_commitment: BTreeMap::new(),
        }
    }
}

/// Installed renewable plant. Informational: availability comes from the
/// hourly series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RenewablePlant {
    pub bus: String,
    pub tech: String,
    pub capacity: f64,
}

/// circuit id → non-slack bus id → factor
pub type IsfTable = BTreeMap<String, BTreeMap<String, f64>>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerSystem {
    pub buses: Vec<Bus>,
    #[serde(default)]
    pub circuits: Vec<Circuit>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub isf: Option<IsfTable>,
    #[serde(default)]
    pub thermal: Vec<ThermalUnit>,
    #[serde(default)]
    pub storage: Vec<StorageUnit>,
    #[serde(default)]
    pub config: OperatingConfig,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub renewables: Vec<RenewablePlant>,
}

impl PowerSystem {
    pub fn from_json(text: &str) -> Result<Self, SystemError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self, SystemError> {
        let text = std::fs::read_to_string(path).map_err(|source| SystemError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("system serializes")
    }

    pub fn save(&self, path: &Path) -> Result<(), SystemError> {
        std::fs::write(path, self.to_json()).map_err(|source| SystemError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn column_schema(&self) -> ColumnSchema {
        ColumnSchema {
            nodes: self.buses.iter().map(|b| b.id.clone()).collect(),
            storage_units: self.storage.iter().map(|s| s.id.clone()).collect(),
        }
    }

    pub fn bus_index(&self, id: &str) -> Option<usize> {
        self.buses.iter().position(|b| b.id == id)
    }

    pub fn initial_commitment(&self, unit: &ThermalUnit) -> f64 {
        self.config
            .initial_commitment
            .get(&unit.id)
            .map_or(0.0, |&u| if u > 0 { 1.0 } else { 0.0 })
    }

    pub fn has_short_term_storage(&self) -> bool {
        self.storage.iter().any(|s| s.kind == StorageKind::ShortTerm)
    }

    /// Resolve the network: the given shift-factor table when present,
    /// otherwise factors computed from circuit reactances.
    pub fn network(&self) -> Result<Network, SystemError> {
        let slacks: Vec<usize> = self
            .buses
            .iter()
            .enumerate()
            .filter(|(_, b)| b.slack)
            .map(|(i, _)| i)
            .collect();
        if slacks.len() != 1 {
            return Err(SystemError::SlackCount(slacks.len()));
        }
        let slack = slacks[0];
        let mut ends = Vec::with_capacity(self.circuits.len());
        for c in &self.circuits {
            let from = self
                .bus_index(&c.from)
                .ok_or_else(|| SystemError::UnknownBus(c.id.clone(), c.from.clone()))?;
            let to = self
                .bus_index(&c.to)
                .ok_or_else(|| SystemError::UnknownBus(c.id.clone(), c.to.clone()))?;
            ends.push((from, to));
        }
        let isf = match &self.isf {
            Some(table) => {
                let mut rows = Vec::with_capacity(self.circuits.len());
                for c in &self.circuits {
                    let entry = table
                        .get(&c.id)
                        .ok_or_else(|| SystemError::MissingIsfRow(c.id.clone()))?;
                    let mut row = vec![0.0; self.buses.len()];
                    for (bus, &f) in entry {
                        let b = self
                            .bus_index(bus)
                            .ok_or_else(|| SystemError::UnknownBus(c.id.clone(), bus.clone()))?;
                        if b != slack {
                            row[b] = f;
                        }
                    }
                    rows.push(row);
                }
                rows
            }
            None if self.circuits.is_empty() => Vec::new(),
            None => {
                let mut branches = Vec::with_capacity(self.circuits.len());
                for (c, &(from, to)) in self.circuits.iter().zip(&ends) {
                    match c.reactance {
                        Some(x) if x > 0.0 => branches.push(Branch {
                            from,
                            to,
                            reactance: x,
                        }),
                        _ => return Err(SystemError::BadReactance(c.id.clone())),
                    }
                }
                compute_isf(self.buses.len(), slack, &branches).map_err(|e| match e {
                    IsfError::Disconnected(b) => {
                        SystemError::Disconnected(self.buses[b].id.clone())
                    }
                    IsfError::Singular => SystemError::Singular,
                })?
            }
        };
        Ok(Network {
            slack,
            ends,
            capacity: self.circuits.iter().map(|c| c.capacity).collect(),
            isf,
        })
    }
}

/// Resolved network: circuit endpoints as bus indices and the shift factor
/// of each circuit with respect to each bus (slack column is zero).
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    pub slack: usize,
    pub ends: Vec<(usize, usize)>,
    pub capacity: Vec<f64>,
    pub isf: Vec<Vec<f64>>,
}

impl Network {
    /// DC flows (from → to positive) for a nodal injection vector.
    pub fn flows(&self, injection: &[f64]) -> Vec<f64> {
        self.isf
            .iter()
            .map(|row| row.iter().zip(injection).map(|(f, p)| f * p).sum())
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Branch<T> {
    pub from: usize,
    pub to: usize,
    pub reactance: T,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum IsfError {
    #[error("bus {0} is not connected to the slack")]
    Disconnected(usize),
    #[error("singular susceptance matrix")]
    Singular,
}

/// DC injection shift factors: `isf[c][n]` is the flow on branch `c`
/// (from → to) caused by injecting one unit at bus `n` and withdrawing it at
/// the slack.
pub fn compute_isf<T: Scalar>(
    num_buses: usize,
    slack: usize,
    branches: &[Branch<T>],
) -> Result<Vec<Vec<T>>, IsfError> {
    let mut adjacency = vec![Vec::new(); num_buses];
    for br in branches {
        adjacency[br.from].push(br.to);
        adjacency[br.to].push(br.from);
    }
    let mut seen = vec![false; num_buses];
    let mut queue = VecDeque::from([slack]);
    seen[slack] = true;
    while let Some(b) = queue.pop_front() {
        for &n in &adjacency[b] {
            if !seen[n] {
                seen[n] = true;
                queue.push_back(n);
            }
        }
    }
    if let Some(b) = seen.iter().position(|s| !s) {
        return Err(IsfError::Disconnected(b));
    }

    // reduced susceptance matrix over non-slack buses
    let reduced: Vec<usize> = (0..num_buses).filter(|&b| b != slack).collect();
    let mut pos = vec![usize::MAX; num_buses];
    for (i, &b) in reduced.iter().enumerate() {
        pos[b] = i;
    }
    let m = reduced.len();
    let mut bmat = vec![vec![T::zero(); m]; m];
    for br in branches {
        let y = T::one() / br.reactance;
        for (a, b) in [(br.from, br.to), (br.to, br.from)] {
            if a != slack {
                bmat[pos[a]][pos[a]] += y;
                if b != slack {
                    bmat[pos[a]][pos[b]] -= y;
                }
            }
        }
    }
    let inverse = invert(bmat).ok_or(IsfError::Singular)?;

    let angle = |bus: usize, inj: usize| -> T {
        if bus == slack {
            T::zero()
        } else {
            inverse[pos[bus]][pos[inj]]
        }
    };
    Ok(branches
        .iter()
        .map(|br| {
            (0..num_buses)
                .map(|n| {
                    if n == slack {
                        T::zero()
                    } else {
                        (angle(br.from, n) - angle(br.to, n)) / br.reactance
                    }
                })
                .collect()
        })
        .collect())
}

/// Gauss-Jordan inverse with partial pivoting.
fn invert<T: Scalar>(mut a: Vec<Vec<T>>) -> Option<Vec<Vec<T>>> {
    let n = a.len();
    let mut inv: Vec<Vec<T>> = (0..n)
        .map(|i| (0..n).map(|j| if i == j { T::one() } else { T::zero() }).collect())
        .collect();
    let scale = a
        .iter()
        .flatten()
        .fold(T::zero(), |m, v| m.max(v.abs()))
        .max(T::one());
    let tol = T::epsilon() * T::of(n.max(1) as f64) * scale;
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| {
            a[i][col]
                .abs()
                .partial_cmp(&a[j][col].abs())
                .unwrap_or(std::cmp::Ordering::Equal)
        })?;
        if a[pivot][col].abs() <= tol {
            return None;
        }
        a.swap(col, pivot);
        inv.swap(col, pivot);
        let p = a[col][col];
        for j in 0..n {
            a[col][j] /= p;
            inv[col][j] /= p;
        }
        for i in 0..n {
            if i != col {
                let f = a[i][col];
                if f != T::zero() {
                    for j in 0..n {
                        let (aj, ij) = (a[col][j], inv[col][j]);
                        a[i][j] -= f * aj;
                        inv[i][j] -= f * ij;
                    }
                }
            }
        }
    }
    Some(inv)
}

/// One broken invariant or dangling reference.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub subject: String,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }

    fn push(&mut self, subject: impl Into<String>, message: impl Into<String>) {
        self.violations.push(Violation {
            subject: subject.into(),
            message: message.into(),
        });
    }
}

impl std::fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for v in &self.violations {
            writeln!(f, "{}: {}", v.subject, v.message)?;
        }
        Ok(())
    }
}

/// Check every unit and network invariant plus the cross references between
/// the system and the hourly data. Never fails; returns the list of problems.
pub fn validate_system<T: Scalar>(
    system: &PowerSystem,
    data: &TimeHorizonData<T>,
) -> ValidationReport {
    let mut report = ValidationReport::default();
    let buses: HashSet<&str> = system.buses.iter().map(|b| b.id.as_str()).collect();
    let mut ids: HashMap<&str, usize> = HashMap::new();
    for b in &system.buses {
        *ids.entry(b.id.as_str()).or_default() += 1;
    }
    for (id, count) in ids {
        if count > 1 {
            report.push(id, "duplicate bus id");
        }
    }
    let slack_count = system.buses.iter().filter(|b| b.slack).count();
    if slack_count != 1 {
        report.push(
            "buses",
            format!("exactly one slack bus required, found {slack_count}"),
        );
    }

    let mut unit_ids = HashSet::new();
    for t in &system.thermal {
        let s = format!("thermal `{}`", t.id);
        if !unit_ids.insert(t.id.as_str()) {
            report.push(&s, "duplicate unit id");
        }
        if !buses.contains(t.bus.as_str()) {
            report.push(&s, format!("unknown bus `{}`", t.bus));
        }
        if !(0.0 <= t.q_min && t.q_min <= t.q_max) {
            report.push(&s, "requires 0 <= q_min <= q_max");
        }
        if [t.fuel_cost, t.alpha, t.beta, t.gamma, t.om_cost]
            .iter()
            .any(|&c| c < 0.0)
        {
            report.push(&s, "costs and fuel terms must be non-negative");
        }
        if t.ramp_10min < 0.0 {
            report.push(&s, "ramp_10min must be non-negative");
        }
    }
    for h in &system.storage {
        let s = format!("storage `{}`", h.id);
        if !unit_ids.insert(h.id.as_str()) {
            report.push(&s, "duplicate unit id");
        }
        if !buses.contains(h.bus.as_str()) {
            report.push(&s, format!("unknown bus `{}`", h.bus));
        }
        if !(h.w_min <= h.w0 && h.w0 <= h.w_max) {
            report.push(&s, "requires w_min <= w0 <= w_max");
        }
        if !(h.w_min <= h.w_fin && h.w_fin <= h.w_max) {
            report.push(&s, "requires w_min <= w_fin <= w_max");
        }
        if !(h.efficiency > 0.0 && h.efficiency <= 1.0) {
            report.push(&s, "efficiency must be in (0, 1]");
        }
        if !(0.0 <= h.epr_min && h.epr_min <= h.epr_max) {
            report.push(&s, "requires 0 <= epr_min <= epr_max");
        }
        if h.q_max < 0.0 || h.b_max < 0.0 || h.inv_cost < 0.0 {
            report.push(&s, "q_max, b_max and inv_cost must be non-negative");
        }
    }
    for c in &system.circuits {
        let s = format!("circuit `{}`", c.id);
        for end in [&c.from, &c.to] {
            if !buses.contains(end.as_str()) {
                report.push(&s, format!("unknown bus `{end}`"));
            }
        }
        if c.capacity < 0.0 {
            report.push(&s, "capacity must be non-negative");
        }
        if let Some(table) = &system.isf {
            if !table.contains_key(&c.id) {
                report.push(&s, "no shift-factor row");
            }
        }
    }
    let c = &system.config;
    if c.reserve_fraction < 0.0 {
        report.push("config", "reserve_fraction must be non-negative");
    }
    if c.pns_penalty < 0.0 || c.spill_penalty < 0.0 {
        report.push("config", "penalties must be non-negative");
    }
    for id in c.initial_commitment.keys() {
        if !system.thermal.iter().any(|t| &t.id == id) {
            report.push(
                "config",
                format!("initial commitment for unknown unit `{id}`"),
            );
        }
    }
    if slack_count == 1 && report.violations.iter().all(|v| !v.subject.starts_with("circuit")) {
        if let Err(e) = system.network() {
            report.push("network", e.to_string());
        }
    }

    let schema = system.column_schema();
    if data.nodes != schema.nodes {
        report.push(
            "data",
            format!(
                "demand/renewable columns {:?} do not match buses {:?}",
                data.nodes, schema.nodes
            ),
        );
    }
    if data.storage_units != schema.storage_units {
        report.push(
            "data",
            format!(
                "inflow columns {:?} do not match storage units {:?}",
                data.storage_units, schema.storage_units
            ),
        );
    }
    if let Err(e) = data.validate() {
        report.push("data", e.to_string());
    }
    report
}
