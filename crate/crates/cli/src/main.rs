use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use timerep::formulations::FormulationKind;
use timerep::pipeline::{
    emit_scenario_template, run_until, solver_for, PipelineRun, ScenarioConfig, Stage, StageError,
    TemplateOptions,
};

#[derive(Parser)]
#[command(name = "timerep", version, about = "Storage investment models under different time representations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Load and validate the system and hourly data.
    Ingest(RunArgs),
    /// Cluster hours into states and days into representative days.
    Cluster(RunArgs),
    /// Build the models and write their interchange files.
    Build(RunArgs),
    /// Build and solve.
    Solve(RunArgs),
    /// Solve, expand to hours, check storage bounds and audit constraints.
    Evaluate(RunArgs),
    /// Full pipeline including the comparison against the hourly model.
    Report(RunArgs),
    /// Write a scenario for one of the four capacity visions.
    Template(TemplateArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Scenario file (TOML).
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    /// Number of system states.
    #[arg(long)]
    states: Option<usize>,
    /// Number of representative days.
    #[arg(long)]
    rep_periods: Option<usize>,
    /// Checkpoint spacing of the state models, hours.
    #[arg(long)]
    state_window: Option<usize>,
    /// Checkpoint spacing of RP-TM&CI, hours.
    #[arg(long)]
    tmci_window: Option<usize>,
    /// `highs` or the path of an external solver adapter.
    #[arg(long)]
    solver: Option<String>,
    /// Relative MIP gap.
    #[arg(long)]
    gap: Option<f64>,
    /// Concurrent solves.
    #[arg(long)]
    workers: Option<usize>,
    /// Comma-separated formulations, e.g. `hm,rp_tmci`.
    #[arg(long, value_delimiter = ',')]
    only: Option<Vec<String>>,
    /// Output directory.
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long)]
    time_limit: Option<f64>,
}

#[derive(Args)]
struct TemplateArgs {
    /// Capacity vision, 1 to 4.
    #[arg(long, default_value_t = 1)]
    vision: usize,
    /// Horizon length in hours (whole days).
    #[arg(long, default_value_t = 2184)]
    hours: usize,
    /// Capacity and demand multiplier.
    #[arg(long, default_value_t = 0.1)]
    scale: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Target directory.
    #[arg(long, short)]
    out: PathBuf,
}

impl RunArgs {
    fn config(&self) -> Result<ScenarioConfig, StageError> {
        let mut cfg = ScenarioConfig::load(&self.config).map_err(|error| StageError {
            stage: Stage::Ingest,
            error,
        })?;
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(n) = self.states {
            cfg.states = n;
        }
        if let Some(n) = self.rep_periods {
            cfg.rep_periods = n;
        }
        if self.state_window.is_some() {
            cfg.state_window = self.state_window;
        }
        if let Some(m) = self.tmci_window {
            cfg.tmci.window = m;
        }
        if let Some(s) = &self.solver {
            cfg.solver.name = Some(s.clone());
        }
        if let Some(g) = self.gap {
            cfg.solver.gap = g;
        }
        if let Some(t) = self.time_limit {
            cfg.solver.time_limit = Some(t);
        }
        if let Some(w) = self.workers {
            cfg.workers = w;
        }
        if let Some(o) = &self.output {
            cfg.output = o.clone();
        }
        if let Some(only) = &self.only {
            cfg.formulations = only
                .iter()
                .map(|s| {
                    FormulationKind::parse(s).ok_or_else(|| StageError {
                        stage: Stage::Ingest,
                        error: timerep::pipeline::PipelineError::Config(format!("unknown formulation `{s}`")),
                    })
                })
                .collect::<Result<_, _>>()?;
        }
        Ok(cfg)
    }
}

fn print_run(run: &PipelineRun, stage: Stage) {
    if let Some(s) = &run.scenario {
        println!(
            "horizon {} h, {} buses, {} thermal units, {} storage units",
            s.data.horizon_hours(),
            s.system.buses.len(),
            s.system.thermal.len(),
            s.system.storage.len()
        );
    }
    if let Some(agg) = &run.aggregation {
        if agg.states.is_some() || agg.rep_periods.is_some() {
            println!("clustering took {:.2} s", run.cluster_seconds);
        }
        if let Some(st) = &agg.states {
            println!("{} system states", st.num_states);
        }
        if let Some(rp) = &agg.rep_periods {
            println!("{} representative days, weights {:?}", rp.num_rp, rp.weights);
        }
    }
    if stage == Stage::Build {
        for o in &run.outputs {
            println!(
                "{:<9} {:>9} vars {:>8} int {:>9} rows",
                o.kind().label(),
                o.model.num_vars(),
                o.model.num_integer(),
                o.model.num_rows()
            );
        }
    }
    if !run.summaries.is_empty() {
        println!(
            "{:<9} {:>12} {:>16} {:>9} {:>9} {:>10} {:>11}",
            "model", "status", "objective", "build s", "solve s", "violations", "audit"
        );
        for s in &run.summaries {
            println!(
                "{:<9} {:>12} {:>16.4} {:>9.2} {:>9.2} {:>10} {:>11.2e}",
                s.formulation.label(),
                format!("{:?}", s.status),
                s.objective,
                s.build_seconds,
                s.seconds,
                s.violations,
                s.audit_residual
            );
        }
    }
    for r in &run.reports {
        println!("{} vs HM", r.kind.label());
        for m in &r.metrics {
            let unit = if m.absolute { "abs" } else { "%" };
            println!("  {:<28} {:>14.4} {:>14.4} {:>10.3} {unit}", m.name, m.benchmark, m.candidate, m.error);
        }
    }
    if stage >= Stage::Build {
        println!("artifacts in {}", run.tree.root.display());
    }
}

fn exit_code(err: &StageError) -> u8 {
    let e = &err.error;
    if e.is_infeasible() {
        4
    } else if e.is_solver() {
        3
    } else if e.is_config() {
        2
    } else {
        1
    }
}

fn run_stage(args: &RunArgs, stage: Stage) -> Result<(), StageError> {
    let cfg = args.config()?;
    let adapter = solver_for(&cfg);
    let run = run_until(&cfg, stage, adapter.as_ref())?;
    print_run(&run, stage);
    Ok(())
}

fn template(args: &TemplateArgs) -> Result<()> {
    let opts = TemplateOptions {
        vision: args.vision,
        hours: args.hours,
        scale: args.scale,
        seed: args.seed,
    };
    emit_scenario_template(&opts, &args.out)
        .with_context(|| format!("writing template to {}", args.out.display()))?;
    println!("wrote {}", args.out.join("scenario.toml").display());
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let (args, stage) = match &cli.command {
        Command::Template(t) => {
            return match template(t) {
                Ok(()) => ExitCode::SUCCESS,
                Err(e) => {
                    eprintln!("error: {e:#}");
                    ExitCode::from(2)
                }
            }
        }
        Command::Ingest(a) => (a, Stage::Ingest),
        Command::Cluster(a) => (a, Stage::Cluster),
        Command::Build(a) => (a, Stage::Build),
        Command::Solve(a) => (a, Stage::Solve),
        Command::Evaluate(a) => (a, Stage::Evaluate),
        Command::Report(a) => (a, Stage::Report),
    };
    match run_stage(args, stage) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
