//! Command-line front end.
//!
//! Exit codes: 0 success, 1 invalid input or configuration, 2 the simulation
//! aborted (the partial trace is still written).

use crate::ecbf::InfeasibilityPolicy;
use crate::error::Error;
use crate::io::{parse_config, read_csv, write_csv, emit_plot, PlotOverlay, RunReport};
use crate::sim::{preset, run, ScenarioConfig, Trace, PRESET_NAMES};
use clap::{Parser, Subcommand, ValueEnum};
use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 1;
pub const EXIT_ABORTED: i32 = 2;

/// Environment variable overriding the default output directory.
pub const OUTPUT_ENV: &str = "SAFEGUARD_OUT";
pub const DEFAULT_OUTPUT_DIR: &str = "out";

#[derive(Debug, Parser)]
#[command(name = "safeguard", version, about = "Safe admittance control of a planar two-link arm")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate a preset or a config file and write its trace.
    Run(RunArgs),
    /// Recompute the summary report from a trace CSV.
    Report { csv: PathBuf },
    /// List the preset scenarios.
    Presets,
}

#[derive(Debug, clap::Args)]
struct RunArgs {
    /// Preset name or path to an INI config file.
    #[arg(long, default_value = "combined")]
    scenario: String,
    /// Output directory (defaults to $SAFEGUARD_OUT, then `out`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Feed the raw human force to the admittance model.
    #[arg(long)]
    no_filter: bool,
    #[arg(long, value_enum)]
    constraints: Option<ConstraintSet>,
    #[arg(long)]
    duration: Option<f64>,
    #[arg(long)]
    dt: Option<f64>,
    /// Also write an SVG of the trajectories.
    #[arg(long)]
    plot: bool,
    /// Relax infeasible steps with penalised slack instead of aborting.
    #[arg(long)]
    slack: bool,
    /// Run every preset concurrently (ignores --scenario).
    #[arg(long)]
    all_presets: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ConstraintSet {
    Workspace,
    Obstacle,
    Both,
    None,
}

impl RunArgs {
    fn apply(&self, cfg: &mut ScenarioConfig) {
        if self.no_filter {
            cfg.filter_enabled = false;
        }
        if let Some(set) = self.constraints {
            (cfg.workspace_enabled, cfg.obstacle_enabled) = match set {
                ConstraintSet::Workspace => (true, false),
                ConstraintSet::Obstacle => (false, true),
                ConstraintSet::Both => (true, true),
                ConstraintSet::None => (false, false),
            };
        }
        if let Some(d) = self.duration {
            cfg.duration = d;
        }
        if let Some(dt) = self.dt {
            cfg.dt = dt;
        }
        if self.slack && cfg.infeasibility == InfeasibilityPolicy::Error {
            cfg.infeasibility = InfeasibilityPolicy::Slack { weight: InfeasibilityPolicy::DEFAULT_SLACK_WEIGHT };
        }
    }

    fn output_dir(&self) -> PathBuf {
        self.out
            .clone()
            .or_else(|| std::env::var_os(OUTPUT_ENV).filter(|v| !v.is_empty()).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT_DIR))
    }
}

fn load_scenario(name_or_path: &str) -> Result<ScenarioConfig, Error> {
    match preset(name_or_path) {
        Some(cfg) => Ok(cfg),
        None if Path::new(name_or_path).is_file() => parse_config(name_or_path),
        None => Err(Error::Validation(format!(
            "`{name_or_path}` is neither a preset ({}) nor a readable config file",
            PRESET_NAMES.join(", ")
        ))),
    }
}

fn exit_code_for(error: &Error) -> i32 {
    match error {
        Error::Validation(_) | Error::Parse { .. } | Error::StartOutsideSafeSet { .. } => EXIT_INVALID,
        _ => EXIT_ABORTED,
    }
}

struct Outcome {
    name: String,
    trace: Trace,
    runtime: Duration,
    failure: Option<Error>,
}

fn simulate(cfg: &ScenarioConfig) -> Outcome {
    let started = Instant::now();
    let result = run(cfg);
    let runtime = started.elapsed();
    let (trace, failure) = match result {
        Ok(trace) => (trace, None),
        Err(f) => (f.trace, Some(f.error)),
    };
    Outcome { name: cfg.name.clone(), trace, runtime, failure }
}

fn write_outputs(cfg: &ScenarioConfig, outcome: &Outcome, args: &RunArgs, err: &mut dyn Write) -> Result<(), Error> {
    let dir = args.output_dir();
    std::fs::create_dir_all(&dir).map_err(|e| Error::Io(format!("{}: {e}", dir.display())))?;
    let csv = dir.join(format!("{}.csv", outcome.name));
    write_csv(&outcome.trace, &csv)?;
    let _ = writeln!(err, "wrote {}", csv.display());
    if args.plot && !outcome.trace.is_empty() {
        let svg = dir.join(format!("{}.svg", outcome.name));
        emit_plot(&outcome.trace, &PlotOverlay::from_config(cfg), &outcome.name, &svg)?;
        let _ = writeln!(err, "wrote {}", svg.display());
    }
    Ok(())
}

fn run_command(args: &RunArgs, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let configs: Vec<ScenarioConfig> = if args.all_presets {
        PRESET_NAMES.iter().filter_map(|n| preset(n)).collect()
    } else {
        match load_scenario(&args.scenario) {
            Ok(cfg) => vec![cfg],
            Err(e) => {
                let _ = writeln!(err, "error: {e}");
                return EXIT_INVALID;
            }
        }
    };
    let configs: Vec<ScenarioConfig> = configs
        .into_iter()
        .map(|mut cfg| {
            args.apply(&mut cfg);
            cfg
        })
        .collect();
    for cfg in &configs {
        if let Err(e) = cfg.validate() {
            let _ = writeln!(err, "error: {}: {e}", cfg.name);
            return EXIT_INVALID;
        }
    }

    let outcomes: Vec<Outcome> = std::thread::scope(|scope| {
        let handles: Vec<_> = configs.iter().map(|cfg| scope.spawn(move || simulate(cfg))).collect();
        handles.into_iter().map(|h| h.join().expect("simulation thread panicked")).collect()
    });

    let mut code = EXIT_OK;
    for (cfg, outcome) in configs.iter().zip(&outcomes) {
        if let Some(e) = &outcome.failure {
            let _ = writeln!(err, "error: {}: {e} (after {} recorded steps)", outcome.name, outcome.trace.len());
            code = code.max(exit_code_for(e));
            if exit_code_for(e) == EXIT_INVALID {
                continue;
            }
        }
        if let Err(e) = write_outputs(cfg, outcome, args, err) {
            let _ = writeln!(err, "error: {e}");
            code = code.max(EXIT_ABORTED);
            continue;
        }
        let _ = writeln!(out, "{}", RunReport::from_trace(&outcome.name, &outcome.trace));
        let _ = writeln!(out, "runtime               {:.3} ms", outcome.runtime.as_secs_f64() * 1e3);
        let _ = writeln!(out);
    }
    code
}

fn report_command(path: &Path, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    match read_csv(path) {
        Ok(trace) => {
            let name = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
            let _ = writeln!(out, "{}", RunReport::from_trace(&name, &trace));
            EXIT_OK
        }
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_INVALID
        }
    }
}

/// Entry point taking the full argument list, program name included.
pub fn main_with<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let informational = matches!(
                e.kind(),
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion
            );
            if informational {
                let _ = write!(out, "{e}");
                return EXIT_OK;
            }
            let _ = write!(err, "{e}");
            return EXIT_INVALID;
        }
    };
    match cli.command {
        Command::Run(args) => run_command(&args, out, err),
        Command::Report { csv } => report_command(&csv, out, err),
        Command::Presets => {
            for cfg in crate::sim::scenario_library() {
                let constraints = match (cfg.workspace_enabled, cfg.obstacle_enabled) {
                    (true, true) => "workspace+obstacle",
                    (true, false) => "workspace",
                    (false, true) => "obstacle",
                    (false, false) => "none",
                };
                let filter = if cfg.filter_enabled { "filtered" } else { "unfiltered" };
                let _ = writeln!(out, "{:<16} {constraints:<19} {filter}", cfg.name);
            }
            EXIT_OK
        }
    }
}
