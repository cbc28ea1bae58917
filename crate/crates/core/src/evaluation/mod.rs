//! Hourly reconstruction of solved models, storage-bound checks, prices and
//! error metrics against the hourly benchmark.

pub mod audit;
mod expand;
mod prices;
mod report;

use crate::aggregation::RepPeriodClustering;
use crate::formulations::FormulationKind;
use crate::StateClustering;

pub use audit::{audit, AuditReport, FamilyAudit};
pub use expand::{
    detect_violations, expand, expand_hm, expand_rp, expand_ss, write_hourly_csv, HourlyExpansion,
    StorageViolation,
};
pub use prices::{compute_prices, SlotPrices};
pub use report::{compare, EvaluationReport, Metric, ViolationSummary};

/// Absolute tolerance for storage-bound violations, GWh.
pub const VIOLATION_TOLERANCE: f64 = 1e-6;

/// How hours map onto the slots of a formulation.
#[derive(Debug, Clone, Copy)]
pub enum TimeMap<'a> {
    Hourly,
    States(&'a StateClustering),
    RepPeriods(&'a RepPeriodClustering),
}

impl TimeMap<'_> {
    /// Slot index of each real hour.
    pub fn slots(&self, hours: usize) -> Vec<usize> {
        match self {
            TimeMap::Hourly => (0..hours).collect(),
            TimeMap::States(s) => s.assignment.clone(),
            TimeMap::RepPeriods(rp) => (0..hours).map(|p| rp.rep_index(p)).collect(),
        }
    }

    fn fits(&self, kind: FormulationKind) -> bool {
        matches!(
            (self, kind),
            (TimeMap::Hourly, FormulationKind::Hm)
                | (TimeMap::States(_), FormulationKind::Ss | FormulationKind::SsRfm)
                | (TimeMap::RepPeriods(_), FormulationKind::Rp | FormulationKind::RpTmci)
        )
    }
}

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("{kind} results cannot be expanded with this time map")]
    WrongMap { kind: FormulationKind },
    #[error("solution has no values")]
    NoValues,
    #[error("no Δw for observed transition {0} → {1}")]
    MissingTransition(usize, usize),
    #[error("time map covers {map} h but the data has {data} h")]
    Horizon { map: usize, data: usize },
    #[error("system: {0}")]
    System(String),
    #[error("solution has no row duals")]
    NoDuals,
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
