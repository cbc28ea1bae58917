use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::formulations::{FormulationKind, TmciOptions};
use crate::milp::SolverOptions;
use crate::system::PowerSystem;

use super::PipelineError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    /// `highs` or the path of an external adapter executable.
    pub name: Option<String>,
    pub gap: f64,
    pub time_limit: Option<f64>,
    pub threads: Option<u32>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            name: None,
            gap: 0.0,
            time_limit: None,
            threads: None,
        }
    }
}

impl SolverConfig {
    pub fn options(&self) -> SolverOptions {
        SolverOptions {
            gap: self.gap,
            time_limit: self.time_limit,
            threads: self.threads,
        }
    }
}

/// A scenario file. Relative paths resolve against the directory of the
/// file they were read from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    /// System description (JSON).
    pub system: PathBuf,
    /// Directory holding the hourly series.
    pub data: PathBuf,
    pub output: PathBuf,
    pub formulations: Vec<FormulationKind>,
    /// Number of system states.
    pub states: usize,
    /// Number of representative days.
    pub rep_periods: usize,
    pub seed: u64,
    /// Checkpoint spacing of the state models, hours. Unset means 24 h when
    /// the system has short-term storage and 168 h otherwise.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub state_window: Option<usize>,
    pub tmci: TmciOptions,
    pub invest: bool,
    /// Compute marginal prices with a fix-and-relax pass.
    pub prices: bool,
    /// Concurrent solves.
    pub workers: usize,
    pub solver: SolverConfig,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            name: "scenario".into(),
            system: "system.json".into(),
            data: "data".into(),
            output: "out".into(),
            formulations: FormulationKind::ALL.to_vec(),
            states: 48,
            rep_periods: 9,
            seed: 1,
            state_window: None,
            tmci: TmciOptions::default(),
            invest: true,
            prices: true,
            workers: 1,
            solver: SolverConfig::default(),
        }
    }
}

impl ScenarioConfig {
    /// Checkpoint spacing of the state models for `system`.
    pub fn state_window_for(&self, system: &PowerSystem) -> usize {
        self.state_window
            .unwrap_or(if system.has_short_term_storage() { 24 } else { 168 })
    }

    pub fn from_toml(text: &str) -> Result<Self, PipelineError> {
        toml::from_str(text).map_err(|e| PipelineError::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    /// Read a scenario file and resolve its relative paths.
    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text = std::fs::read_to_string(path).map_err(|_| PipelineError::Missing(path.to_path_buf()))?;
        let mut cfg = Self::from_toml(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve(base);
        Ok(cfg)
    }

    pub fn resolve(&mut self, base: &Path) {
        for p in [&mut self.system, &mut self.data, &mut self.output] {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
    }

    pub fn wants(&self, kind: FormulationKind) -> bool {
        self.formulations.contains(&kind)
    }

    pub fn needs_states(&self) -> bool {
        self.formulations.iter().any(|k| k.is_state_family())
    }

    pub fn needs_rep_periods(&self) -> bool {
        self.wants(FormulationKind::Rp) || self.wants(FormulationKind::RpTmci)
    }

    /// Counts and referenced files.
    pub fn validate(&self) -> Result<(), PipelineError> {
        let bad = |m: &str| Err(PipelineError::Config(m.into()));
        if self.formulations.is_empty() {
            return bad("no formulations selected");
        }
        if self.states == 0 || self.rep_periods == 0 {
            return bad("states and rep_periods must be at least 1");
        }
        if self.state_window == Some(0) || self.tmci.window == 0 {
            return bad("checkpoint spacing must be at least 1 h");
        }
        if self.workers == 0 {
            return bad("workers must be at least 1");
        }
        if !(self.solver.gap >= 0.0) {
            return bad("solver gap must be non-negative");
        }
        for p in [&self.system, &self.data] {
            if !p.exists() {
                return Err(PipelineError::Missing(p.clone()));
            }
        }
        Ok(())
    }
}
