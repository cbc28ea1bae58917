//! Scenario pipeline: ingest, cluster, build, solve, evaluate, report.
//!
//! Artifacts land under the configured output directory:
//! `agg/`, `models/`, `solutions/` and `report/`.

mod config;
mod template;

use std::fmt;
use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::time::Instant;

use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::aggregation::{
    build_rp_transition_matrix, cluster_days, cluster_states, AggregationArtifacts, ClusterError,
    TransitionMatrices,
};
use crate::evaluation::{
    audit, compare, compute_prices, detect_violations, expand, write_hourly_csv, AuditReport, EvalError,
    EvaluationReport, HourlyExpansion, SlotPrices, StorageViolation, TimeMap,
};
use crate::formulations::{
    build_hm, build_rp, build_rp_tmci, build_ss, build_ss_rfm, FormulationError, FormulationKind,
    FormulationOutput,
};
use crate::milp::{
    adapter_by_name, adapter_from_env, fix_and_relax, write_mps, MilpError, Registry, Solution, SolveStatus,
    SolverAdapter,
};
use crate::system::{validate_system, PowerSystem, SystemError};
use crate::timeseries::{load_horizon, normalize_series, DataError};
use crate::HorizonData;

pub use config::{ScenarioConfig, SolverConfig};
pub use template::{
    emit_scenario_template, scenario_template, synthetic_profiles, template_system, ScenarioTemplate,
    TemplateOptions, TECHS, VISION_CAPACITY_MW,
};

pub const AGGREGATION_FILE: &str = "aggregation.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Stage {
    Ingest,
    Cluster,
    Build,
    Solve,
    Evaluate,
    Report,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Stage::Ingest => "ingest",
            Stage::Cluster => "cluster",
            Stage::Build => "build",
            Stage::Solve => "solve",
            Stage::Evaluate => "evaluate",
            Stage::Report => "report",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("configuration: {0}")]
    Config(String),
    #[error("missing file: {}", .0.display())]
    Missing(PathBuf),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("invalid system:\n{0}")]
    InvalidSystem(String),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    System(#[from] SystemError),
    #[error(transparent)]
    Cluster(#[from] ClusterError),
    #[error("{kind}: {source}")]
    Build { kind: FormulationKind, source: FormulationError },
    #[error(transparent)]
    Milp(#[from] MilpError),
    #[error("{kind}: solver returned {status:?}")]
    Infeasible { kind: FormulationKind, status: SolveStatus },
    #[error("{kind}: {message}")]
    Solver { kind: FormulationKind, message: String },
    #[error("{kind}: {source}")]
    Eval { kind: FormulationKind, source: EvalError },
}

impl PipelineError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        PipelineError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    /// Caused by the scenario inputs rather than by a solver.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            PipelineError::Config(_)
                | PipelineError::Missing(_)
                | PipelineError::InvalidSystem(_)
                | PipelineError::Data(_)
                | PipelineError::System(_)
                | PipelineError::Cluster(_)
                | PipelineError::Build { .. }
        )
    }

    pub fn is_solver(&self) -> bool {
        matches!(self, PipelineError::Solver { .. } | PipelineError::Milp(MilpError::Solver(..)))
    }

    pub fn is_infeasible(&self) -> bool {
        matches!(self, PipelineError::Infeasible { .. })
    }
}

/// A pipeline failure tagged with the stage it happened in.
#[derive(Debug, Error)]
#[error("{stage} stage failed: {error}")]
pub struct StageError {
    pub stage: Stage,
    #[source]
    pub error: PipelineError,
}

trait AtStage<T> {
    fn at(self, stage: Stage) -> Result<T, StageError>;
}

impl<T, E: Into<PipelineError>> AtStage<T> for Result<T, E> {
    fn at(self, stage: Stage) -> Result<T, StageError> {
        self.map_err(|e| StageError {
            stage,
            error: e.into(),
        })
    }
}

/// Output directory layout.
#[derive(Debug, Clone)]
pub struct ArtifactTree {
    pub root: PathBuf,
}

impl ArtifactTree {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    fn dir(&self, name: &str) -> Result<PathBuf, PipelineError> {
        let d = self.root.join(name);
        std::fs::create_dir_all(&d).map_err(|e| PipelineError::io(&d, e))?;
        Ok(d)
    }

    pub fn agg(&self) -> Result<PathBuf, PipelineError> {
        self.dir("agg")
    }

    pub fn models(&self) -> Result<PathBuf, PipelineError> {
        self.dir("models")
    }

    pub fn solutions(&self) -> Result<PathBuf, PipelineError> {
        self.dir("solutions")
    }

    pub fn report(&self) -> Result<PathBuf, PipelineError> {
        self.dir("report")
    }
}

fn create(path: &Path) -> Result<BufWriter<File>, PipelineError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| PipelineError::io(path, e))
}

fn write_text(path: &Path, text: &str) -> Result<(), PipelineError> {
    std::fs::write(path, text).map_err(|e| PipelineError::io(path, e))
}

pub struct Scenario {
    pub system: PowerSystem,
    pub data: HorizonData,
}

/// Load the system and the hourly series and check them against each other.
pub fn ingest(cfg: &ScenarioConfig) -> Result<Scenario, PipelineError> {
    cfg.validate()?;
    let system = PowerSystem::load(&cfg.system)?;
    let data: HorizonData = load_horizon(&cfg.data, &system.column_schema())?;
    let report = validate_system(&system, &data);
    if !report.is_empty() {
        return Err(PipelineError::InvalidSystem(report.to_string()));
    }
    info!(
        "ingested {} h, {} buses, {} thermal, {} storage",
        data.horizon_hours(),
        system.buses.len(),
        system.thermal.len(),
        system.storage.len()
    );
    Ok(Scenario { system, data })
}

/// State and day clusterings the selected formulations need. Nothing is
/// computed when only the hourly model is selected.
pub fn cluster(cfg: &ScenarioConfig, scenario: &Scenario) -> Result<AggregationArtifacts, PipelineError> {
    let mut out = AggregationArtifacts {
        seed: cfg.seed,
        states: None,
        state_matrices: None,
        rep_periods: None,
        rp_transitions: None,
    };
    if !cfg.needs_states() && !cfg.needs_rep_periods() {
        return Ok(out);
    }
    let data = &scenario.data;
    let features = normalize_series(data);
    if cfg.needs_states() {
        let states = cluster_states(&features, data.nodes.len(), data.storage_units.len(), cfg.states, cfg.seed)?;
        let window = cfg.state_window_for(&scenario.system).min(data.horizon_hours());
        out.state_matrices = Some(TransitionMatrices::build(&states.assignment, states.num_states, window)?);
        info!("clustered {} h into {} states", data.horizon_hours(), states.num_states);
        out.states = Some(states);
    }
    if cfg.needs_rep_periods() {
        let rp = cluster_days(&features, cfg.rep_periods, cfg.seed)?;
        out.rp_transitions = Some(build_rp_transition_matrix(&rp.day_assignment, rp.num_rp));
        info!("clustered {} days into {} representative days", rp.num_days(), rp.num_rp);
        out.rep_periods = Some(rp);
    }
    Ok(out)
}

fn missing(what: &str) -> PipelineError {
    PipelineError::Config(format!("aggregation artifacts lack {what}"))
}

pub fn build_one(
    kind: FormulationKind,
    cfg: &ScenarioConfig,
    scenario: &Scenario,
    agg: &AggregationArtifacts,
) -> Result<FormulationOutput, PipelineError> {
    let (sys, data, invest) = (&scenario.system, &scenario.data, cfg.invest);
    let built = match kind {
        FormulationKind::Hm => build_hm(sys, data, invest),
        FormulationKind::Ss | FormulationKind::SsRfm => {
            let states = agg.states.as_ref().ok_or_else(|| missing("states"))?;
            let m = agg.state_matrices.as_ref().ok_or_else(|| missing("transition matrices"))?;
            if kind == FormulationKind::Ss {
                build_ss(sys, states, m, invest)
            } else {
                build_ss_rfm(sys, states, m, invest)
            }
        }
        FormulationKind::Rp => {
            let rp = agg.rep_periods.as_ref().ok_or_else(|| missing("representative days"))?;
            build_rp(sys, data, rp, invest)
        }
        FormulationKind::RpTmci => {
            let rp = agg.rep_periods.as_ref().ok_or_else(|| missing("representative days"))?;
            let nrpp = agg.rp_transitions.as_ref().ok_or_else(|| missing("day transitions"))?;
            build_rp_tmci(sys, data, rp, nrpp, &cfg.tmci, invest)
        }
    };
    built.map_err(|source| PipelineError::Build { kind, source })
}

/// Build every selected formulation, in the order listed.
pub fn build(
    cfg: &ScenarioConfig,
    scenario: &Scenario,
    agg: &AggregationArtifacts,
) -> Result<Vec<FormulationOutput>, PipelineError> {
    Ok(build_timed(cfg, scenario, agg)?.into_iter().map(|(o, _)| o).collect())
}

/// As [`build`], with the wall-clock seconds of each build.
pub fn build_timed(
    cfg: &ScenarioConfig,
    scenario: &Scenario,
    agg: &AggregationArtifacts,
) -> Result<Vec<(FormulationOutput, f64)>, PipelineError> {
    cfg.formulations
        .iter()
        .map(|&k| {
            let start = Instant::now();
            let out = build_one(k, cfg, scenario, agg)?;
            let seconds = start.elapsed().as_secs_f64();
            info!(
                "built {k}: {} variables ({} integer), {} rows",
                out.model.num_vars(),
                out.model.num_integer(),
                out.model.num_rows()
            );
            for note in &out.meta.notes {
                info!("{k}: {note}");
            }
            Ok((out, seconds))
        })
        .collect()
}

/// Interchange file and name registry of each model.
pub fn write_models(tree: &ArtifactTree, outputs: &[FormulationOutput]) -> Result<(), PipelineError> {
    let dir = tree.models()?;
    for out in outputs {
        let stem = out.kind().stem();
        write_mps(&out.model, create(&dir.join(format!("{stem}.mps")))?)?;
        write_text(&dir.join(format!("{stem}.registry.json")), &Registry::of(&out.model).to_json())?;
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct SolvedModel {
    pub kind: FormulationKind,
    pub solution: Solution,
    pub prices: Option<SlotPrices>,
}

fn solve_one(
    cfg: &ScenarioConfig,
    out: &FormulationOutput,
    adapter: &dyn SolverAdapter,
) -> Result<SolvedModel, PipelineError> {
    let kind = out.kind();
    let opts = cfg.solver.options();
    let solution = adapter
        .solve(&out.model, &opts)
        .map_err(|e| PipelineError::Solver {
            kind,
            message: e.to_string(),
        })?;
    match solution.status {
        SolveStatus::Infeasible => {
            return Err(PipelineError::Infeasible {
                kind,
                status: solution.status,
            })
        }
        s if !s.has_solution() => {
            return Err(PipelineError::Solver {
                kind,
                message: format!("no solution ({s:?})"),
            })
        }
        _ => {}
    }
    info!(
        "solved {kind}: {:?}, objective {:.6}, gap {:.2e}, {:.2} s",
        solution.status, solution.objective, solution.gap, solution.seconds
    );
    let prices = if cfg.prices {
        match fix_and_relax(&out.model, &solution, adapter)
            .map_err(|e| e.to_string())
            .and_then(|lp| compute_prices(out, &lp).map_err(|e| e.to_string()))
        {
            Ok(p) => Some(p),
            Err(e) => {
                warn!("{kind}: no prices: {e}");
                None
            }
        }
    } else {
        None
    };
    Ok(SolvedModel { kind, solution, prices })
}

/// Solve every model, concurrently up to `cfg.workers` when the adapter
/// allows it. Results keep the order of `outputs`.
pub fn solve(
    cfg: &ScenarioConfig,
    outputs: &[FormulationOutput],
    adapter: &dyn SolverAdapter,
) -> Result<Vec<SolvedModel>, PipelineError> {
    if cfg.workers > 1 && adapter.concurrency_safe() && outputs.len() > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.workers)
            .build()
            .map_err(|e| PipelineError::Config(e.to_string()))?;
        pool.install(|| outputs.par_iter().map(|o| solve_one(cfg, o, adapter)).collect())
    } else {
        outputs.iter().map(|o| solve_one(cfg, o, adapter)).collect()
    }
}

pub fn write_solutions(tree: &ArtifactTree, solved: &[SolvedModel]) -> Result<(), PipelineError> {
    let dir = tree.solutions()?;
    for s in solved {
        s.solution.write(create(&dir.join(format!("{}.sol", s.kind.stem())))?)?;
        if let Some(p) = &s.prices {
            let path = dir.join(format!("{}.prices.json", s.kind.stem()));
            let text = serde_json::to_string_pretty(p).map_err(MilpError::from)?;
            write_text(&path, &text)?;
        }
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct ModelEvaluation {
    pub kind: FormulationKind,
    pub expansion: HourlyExpansion,
    pub violations: Vec<StorageViolation>,
    pub audit: AuditReport,
}

pub fn time_map<'a>(kind: FormulationKind, agg: &'a AggregationArtifacts) -> Result<TimeMap<'a>, PipelineError> {
    Ok(match kind {
        FormulationKind::Hm => TimeMap::Hourly,
        FormulationKind::Ss | FormulationKind::SsRfm => {
            TimeMap::States(agg.states.as_ref().ok_or_else(|| missing("states"))?)
        }
        FormulationKind::Rp | FormulationKind::RpTmci => {
            TimeMap::RepPeriods(agg.rep_periods.as_ref().ok_or_else(|| missing("representative days"))?)
        }
    })
}

/// Expand, check storage bounds and audit every solved model.
pub fn evaluate(
    scenario: &Scenario,
    agg: &AggregationArtifacts,
    outputs: &[FormulationOutput],
    solved: &[SolvedModel],
) -> Result<Vec<ModelEvaluation>, PipelineError> {
    outputs
        .iter()
        .zip(solved)
        .map(|(out, s)| {
            let kind = out.kind();
            let map = time_map(kind, agg)?;
            let wrap = |source| PipelineError::Eval { kind, source };
            let expansion = expand(
                out,
                &s.solution,
                &scenario.system,
                &scenario.data,
                map,
                s.prices.as_ref(),
            )
            .map_err(wrap)?;
            let violations = detect_violations(&expansion, &scenario.system);
            let audit = audit(out, &s.solution, &scenario.system, &scenario.data, map).map_err(wrap)?;
            info!(
                "{kind}: {} storage-bound violations, audit residual {:.2e}",
                violations.len(),
                audit.max_residual()
            );
            Ok(ModelEvaluation {
                kind,
                expansion,
                violations,
                audit,
            })
        })
        .collect()
}

pub fn write_evaluations(tree: &ArtifactTree, evals: &[ModelEvaluation]) -> Result<(), PipelineError> {
    let dir = tree.report()?;
    for e in evals {
        let stem = e.kind.stem();
        let path = dir.join(format!("{stem}_hourly.csv"));
        write_hourly_csv(&e.expansion, create(&path)?).map_err(|source| PipelineError::Eval { kind: e.kind, source })?;
        let audit = serde_json::to_string_pretty(&e.audit).map_err(MilpError::from)?;
        write_text(&dir.join(format!("{stem}_audit.json")), &audit)?;
        let viol = serde_json::to_string_pretty(&e.violations).map_err(MilpError::from)?;
        write_text(&dir.join(format!("{stem}_violations.json")), &viol)?;
    }
    Ok(())
}

/// One line of the run summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSummary {
    pub formulation: FormulationKind,
    pub status: SolveStatus,
    pub objective: f64,
    pub gap: f64,
    /// Solve wall-clock.
    pub seconds: f64,
    pub build_seconds: f64,
    pub variables: usize,
    pub integers: usize,
    pub rows: usize,
    pub violations: usize,
    pub audit_residual: f64,
    pub notes: Vec<String>,
}

/// Comparison of every reduced model against the hourly model, when the
/// hourly model was run.
pub fn report(evals: &[ModelEvaluation], system: &PowerSystem) -> Vec<EvaluationReport> {
    let Some(hm) = evals.iter().find(|e| e.kind == FormulationKind::Hm) else {
        return Vec::new();
    };
    evals
        .iter()
        .filter(|e| e.kind != FormulationKind::Hm)
        .map(|e| compare(&hm.expansion, &e.expansion, system))
        .collect()
}

pub fn write_report(
    tree: &ArtifactTree,
    summaries: &[ModelSummary],
    reports: &[EvaluationReport],
) -> Result<(), PipelineError> {
    let dir = tree.report()?;
    let json_err = |e: serde_json::Error| PipelineError::from(MilpError::from(e));
    write_text(
        &dir.join("summary.json"),
        &serde_json::to_string_pretty(summaries).map_err(json_err)?,
    )?;
    let path = dir.join("report.csv");
    let mut csv_out = Vec::new();
    for (i, r) in reports.iter().enumerate() {
        let mut buf = Vec::new();
        r.write_csv(&mut buf).map_err(|source| PipelineError::Eval { kind: r.kind, source })?;
        // keep the header of the first report only
        let text = String::from_utf8(buf).expect("csv is utf-8");
        let body = if i == 0 { &text[..] } else { text.split_once('\n').map_or("", |(_, b)| b) };
        csv_out.extend_from_slice(body.as_bytes());
    }
    std::fs::write(&path, csv_out).map_err(|e| PipelineError::io(&path, e))?;
    write_text(
        &dir.join("report.json"),
        &serde_json::to_string_pretty(reports).map_err(json_err)?,
    )
}

/// Everything a run produced.
pub struct PipelineRun {
    pub tree: ArtifactTree,
    pub scenario: Option<Scenario>,
    pub aggregation: Option<AggregationArtifacts>,
    /// Wall-clock of the clustering stage.
    pub cluster_seconds: f64,
    pub outputs: Vec<FormulationOutput>,
    pub solved: Vec<SolvedModel>,
    pub evaluations: Vec<ModelEvaluation>,
    pub summaries: Vec<ModelSummary>,
    pub reports: Vec<EvaluationReport>,
}

/// The adapter named in the config, else the one from the environment.
pub fn solver_for(cfg: &ScenarioConfig) -> Box<dyn SolverAdapter> {
    match &cfg.solver.name {
        Some(name) => adapter_by_name(name),
        None => adapter_from_env(),
    }
}

/// Run the stages up to and including `last`, writing artifacts as they are
/// produced. Artifacts of completed stages are kept when a later one fails.
pub fn run_until(cfg: &ScenarioConfig, last: Stage, adapter: &dyn SolverAdapter) -> Result<PipelineRun, StageError> {
    let tree = ArtifactTree::new(&cfg.output);
    let mut run = PipelineRun {
        tree: tree.clone(),
        scenario: None,
        aggregation: None,
        cluster_seconds: 0.0,
        outputs: Vec::new(),
        solved: Vec::new(),
        evaluations: Vec::new(),
        summaries: Vec::new(),
        reports: Vec::new(),
    };

    let scenario = ingest(cfg).at(Stage::Ingest)?;
    if last == Stage::Ingest {
        run.scenario = Some(scenario);
        return Ok(run);
    }

    let start = Instant::now();
    let agg = cluster(cfg, &scenario).at(Stage::Cluster)?;
    run.cluster_seconds = start.elapsed().as_secs_f64();
    if cfg.needs_states() || cfg.needs_rep_periods() {
        let dir = tree.agg().at(Stage::Cluster)?;
        agg.save(&dir.join(AGGREGATION_FILE)).at(Stage::Cluster)?;
    }
    if last == Stage::Cluster {
        run.scenario = Some(scenario);
        run.aggregation = Some(agg);
        return Ok(run);
    }

    let (outputs, build_seconds): (Vec<_>, Vec<_>) =
        build_timed(cfg, &scenario, &agg).at(Stage::Build)?.into_iter().unzip();
    write_models(&tree, &outputs).at(Stage::Build)?;
    if last == Stage::Build {
        run.scenario = Some(scenario);
        run.aggregation = Some(agg);
        run.outputs = outputs;
        return Ok(run);
    }

    let solved = solve(cfg, &outputs, adapter).at(Stage::Solve)?;
    write_solutions(&tree, &solved).at(Stage::Solve)?;
    run.summaries = outputs
        .iter()
        .zip(&solved)
        .zip(&build_seconds)
        .map(|((o, s), &b)| ModelSummary {
            formulation: o.kind(),
            status: s.solution.status,
            objective: s.solution.objective,
            gap: s.solution.gap,
            seconds: s.solution.seconds,
            build_seconds: b,
            variables: o.model.num_vars(),
            integers: o.model.num_integer(),
            rows: o.model.num_rows(),
            violations: 0,
            audit_residual: 0.0,
            notes: o.meta.notes.clone(),
        })
        .collect();
    if last == Stage::Solve {
        run.scenario = Some(scenario);
        run.aggregation = Some(agg);
        run.outputs = outputs;
        run.solved = solved;
        return Ok(run);
    }

    let evals = evaluate(&scenario, &agg, &outputs, &solved).at(Stage::Evaluate)?;
    write_evaluations(&tree, &evals).at(Stage::Evaluate)?;
    for (s, e) in run.summaries.iter_mut().zip(&evals) {
        s.violations = e.violations.len();
        s.audit_residual = e.audit.max_residual();
    }
    if last == Stage::Report {
        run.reports = report(&evals, &scenario.system);
        write_report(&tree, &run.summaries, &run.reports).at(Stage::Report)?;
    }
    run.scenario = Some(scenario);
    run.aggregation = Some(agg);
    run.outputs = outputs;
    run.solved = solved;
    run.evaluations = evals;
    Ok(run)
}

/// The full pipeline with the solver named in the config.
pub fn run_pipeline(cfg: &ScenarioConfig) -> Result<PipelineRun, StageError> {
    let adapter = solver_for(cfg);
    run_until(cfg, Stage::Report, adapter.as_ref())
}
