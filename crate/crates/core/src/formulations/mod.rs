//! The five time representations as MILP builders.
//!
//! Every builder returns a [`FormulationOutput`]: the model plus typed
//! handles to the variables and rows that evaluation needs, so nothing
//! downstream has to parse variable names.

#[cfg(test)]
pub(crate) mod fixtures;
mod hm;
mod operational;
mod rp;
mod ss;

use serde::{Deserialize, Serialize};

use crate::milp::{MilpModel, RowId, VarId};
use crate::system::SystemError;

pub use hm::build_hm;
pub use rp::{build_rp, build_rp_tmci, TmciOptions};
pub use ss::{build_ss, build_ss_rfm};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum FormulationKind {
    #[serde(rename = "HM")]
    Hm,
    #[serde(rename = "SS")]
    Ss,
    #[serde(rename = "RP")]
    Rp,
    #[serde(rename = "SS-RFM")]
    SsRfm,
    #[serde(rename = "RP-TM&CI")]
    RpTmci,
}

impl FormulationKind {
    pub const ALL: [FormulationKind; 5] = [
        FormulationKind::Hm,
        FormulationKind::Ss,
        FormulationKind::Rp,
        FormulationKind::SsRfm,
        FormulationKind::RpTmci,
    ];

    pub fn label(self) -> &'static str {
        match self {
            FormulationKind::Hm => "HM",
            FormulationKind::Ss => "SS",
            FormulationKind::Rp => "RP",
            FormulationKind::SsRfm => "SS-RFM",
            FormulationKind::RpTmci => "RP-TM&CI",
        }
    }

    /// File-name friendly form.
    pub fn stem(self) -> &'static str {
        match self {
            FormulationKind::Hm => "hm",
            FormulationKind::Ss => "ss",
            FormulationKind::Rp => "rp",
            FormulationKind::SsRfm => "ss_rfm",
            FormulationKind::RpTmci => "rp_tmci",
        }
    }

    /// Accepts labels and stems, case-insensitively.
    pub fn parse(s: &str) -> Option<Self> {
        let norm = s.trim().to_ascii_lowercase().replace(['-', '&'], "_");
        Self::ALL.into_iter().find(|k| {
            k.stem() == norm || k.label().to_ascii_lowercase().replace(['-', '&'], "_") == norm
        })
    }

    pub fn axis(self) -> TimeAxis {
        match self {
            FormulationKind::Hm => TimeAxis::Hours,
            FormulationKind::Ss | FormulationKind::SsRfm => TimeAxis::States,
            FormulationKind::Rp | FormulationKind::RpTmci => TimeAxis::RepresentativeHours,
        }
    }

    pub fn is_state_family(self) -> bool {
        self.axis() == TimeAxis::States
    }
}

impl std::fmt::Display for FormulationKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeAxis {
    Hours,
    States,
    /// Hours of the representative days, concatenated.
    RepresentativeHours,
}

#[derive(Debug, thiserror::Error)]
pub enum FormulationError {
    #[error("inconsistent dimensions: {0}")]
    Dimensions(String),
    #[error("checkpoint set must end at hour {horizon}, got {last:?}")]
    MissingFinalCheckpoint { horizon: usize, last: Option<usize> },
    #[error("window of {0} h is not a positive multiple of the period length")]
    BadWindow(usize),
    #[error(transparent)]
    System(#[from] SystemError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FormulationMeta {
    pub kind: FormulationKind,
    pub axis: TimeAxis,
    pub invest: bool,
    /// Number of time slots (hours, states or representative hours).
    pub num_periods: usize,
    /// Modeling choices worth keeping next to the results.
    pub notes: Vec<String>,
}

/// Handles to the operational variables of one time slot.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PeriodVars {
    /// per thermal unit
    pub q: Vec<VarId>,
    pub q_above_min: Vec<VarId>,
    pub u: Vec<VarId>,
    pub r: Vec<VarId>,
    /// Startup in this slot (hour-based models only).
    pub y: Vec<VarId>,
    /// per storage unit
    pub q_storage: Vec<VarId>,
    pub b: Vec<VarId>,
    pub sp: Vec<VarId>,
    /// Storage level at the end of the slot (hour-based models only).
    pub w: Vec<VarId>,
    /// per node
    pub v: Vec<VarId>,
    pub pns: Vec<VarId>,
    /// per circuit
    pub pf: Vec<VarId>,
    /// Demand balance row of each node.
    pub balance: Vec<RowId>,
    /// Storage recursion row of each unit (hour-based models only).
    pub storage_balance: Vec<RowId>,
}

/// Transition `from → to` between states with its count and variables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatePair {
    pub from: usize,
    pub to: usize,
    /// `N[from][to]`
    pub count: u32,
    /// Startup variable per thermal unit; empty for self-transitions.
    pub y: Vec<VarId>,
    /// Δw per storage unit.
    pub delta_w: Vec<VarId>,
    /// Row defining each Δw.
    pub delta_w_rows: Vec<RowId>,
}

/// A bound checked on the cumulative (or windowed) Δw sum at hour `hour`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointRows {
    /// 1-based hour
    pub hour: usize,
    pub unit: usize,
    /// `true` when the sum covers only the window since the previous
    /// checkpoint.
    pub windowed: bool,
    pub lower: Option<RowId>,
    pub upper: Option<RowId>,
}

/// Storage checkpoint variable of the chained representative-day model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StorageCheckpoint {
    /// 1-based hour at the end of the window.
    pub hour: usize,
    /// Level per storage unit.
    pub w: Vec<VarId>,
    /// Chaining row per storage unit.
    pub rows: Vec<RowId>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FormulationOutput {
    pub model: MilpModel,
    pub meta: FormulationMeta,
    pub periods: Vec<PeriodVars>,
    /// Real hours each slot stands for (1, T_s or WG_rp).
    pub weights: Vec<f64>,
    /// Investment per storage unit when declared.
    pub investment: Vec<Option<VarId>>,
    /// State transitions with `N > 0` (state models).
    pub pairs: Vec<StatePair>,
    /// Startup of each thermal unit in the first hour (state models).
    pub initial_startup: Vec<VarId>,
    pub checkpoint_rows: Vec<CheckpointRows>,
    /// Day-end rows `w_last ≥ W0` per representative period and unit.
    pub daily_cycle_rows: Vec<Vec<RowId>>,
    /// Commitment linking rows `(from_rp, to_rp, unit, row)`.
    pub link_rows: Vec<(usize, usize, usize, RowId)>,
    pub storage_checkpoints: Vec<StorageCheckpoint>,
}

impl FormulationOutput {
    fn new(model: MilpModel, meta: FormulationMeta) -> Self {
        Self {
            model,
            meta,
            periods: Vec::new(),
            weights: Vec::new(),
            investment: Vec::new(),
            pairs: Vec::new(),
            initial_startup: Vec::new(),
            checkpoint_rows: Vec::new(),
            daily_cycle_rows: Vec::new(),
            link_rows: Vec::new(),
            storage_checkpoints: Vec::new(),
        }
    }

    pub fn kind(&self) -> FormulationKind {
        self.meta.kind
    }

    /// Solved investment per storage unit (0 where undeclared).
    pub fn investment_values(&self, values: &[f64]) -> Vec<f64> {
        self.investment
            .iter()
            .map(|x| x.map_or(0.0, |v| values[v.0]))
            .collect()
    }
}
