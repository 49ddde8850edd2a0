//! Command-line front end: experiment runs from configuration files and one-shot queries.

pub mod config;
pub mod report;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

pub use config::{ExperimentConfig, ExperimentKind};
pub use report::{Report, SCHEMA_VERSION};

use crate::error::{Error, Result};
use crate::kernels::{envelope_x, nash_check, KernelSpec, Multiplier};
use crate::ladder::{
    box_count, box_index, box_partition_check, frak_n_bounds_check, ladder_schedule, random_case_sweep, theta,
};
use crate::scaling::ScalingFunction;
use crate::simulate::{SimConfig, Simulator};
use crate::verify::{
    density_gate, empirical_density, envelope_ratio_report, exit_moments, exit_time_tail, map_paths,
    on_diagonal_check, simulate_terminals, GridSpec, Verdict,
};

/// Exit status for configuration and argument errors.
pub const EXIT_CONFIG: i32 = 3;
/// Exit status for runtime failures other than a verdict.
pub const EXIT_RUNTIME: i32 = 4;

const KAPPAS: [f64; 3] = [1e-3, 1.0, 1e3];
const NDJSON_CHUNK: u64 = 4096;

#[derive(Debug, Parser)]
#[command(name = "aniso", version, about = "Simulation and heat-kernel checks for anisotropic jump processes")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Runs the experiment named in a configuration file.
    Run(RunArgs),
    /// Scaling-function checks.
    #[command(subcommand)]
    Phi(PhiCommand),
    /// Evaluates the heat-kernel envelope at one point pair.
    Envelope(EnvelopeArgs),
    /// Writes simulated paths as NDJSON.
    Simulate(SimulateArgs),
    /// Runs one verification experiment from a configuration file.
    Verify {
        #[arg(value_enum)]
        kind: VerifyKind,
        #[command(flatten)]
        args: RunArgs,
    },
    /// Prints the exponent table and upgrade schedule.
    Ladder(LadderArgs),
    /// Dyadic box decomposition queries.
    #[command(subcommand)]
    Boxes(BoxesCommand),
    /// Dilation scan of the Nash-type energy ratio.
    Nash(NashArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum VerifyKind {
    Envelope,
    Exit,
    Diag,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Report path; defaults to the configured `output`, else stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// CSV table path for experiments with tabular output.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum PhiCommand {
    /// Scans the weak-scaling certificate and the dyadic decay bounds.
    Check {
        /// `power:alpha=1`, `sum:(c=1,a=0.5)+(c=1,a=1.5)` or `table:path.csv`.
        #[arg(long)]
        phi: String,
        #[arg(long, default_value_t = 200)]
        samples: usize,
        #[arg(long, default_value_t = 40)]
        delta_max: u32,
    },
}

#[derive(Debug, Args)]
pub struct EnvelopeArgs {
    #[arg(long)]
    pub phi: String,
    #[arg(long)]
    pub t: f64,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub x: Vec<f64>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub y: Vec<f64>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Include every proposed jump in each line.
    #[arg(long)]
    pub events: bool,
}

#[derive(Debug, Args)]
pub struct LadderArgs {
    #[arg(long)]
    pub d: usize,
    #[arg(long)]
    pub alpha_lower: f64,
    #[arg(long)]
    pub alpha_upper: f64,
}

#[derive(Debug, Subcommand)]
pub enum BoxesCommand {
    /// Cell of `point` in the decomposition centered at `center` with scale `kappa`.
    Classify {
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        point: Vec<f64>,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        center: Vec<f64>,
        #[arg(long, default_value_t = 1.0)]
        kappa: f64,
    },
    /// Number of boxes in shell `k` of dimension `d`.
    Count {
        #[arg(long)]
        k: u32,
        #[arg(long)]
        d: usize,
    },
}

#[derive(Debug, Args)]
pub struct NashArgs {
    #[arg(long)]
    pub phi: String,
    #[arg(long)]
    pub d: usize,
    #[arg(long, default_value_t = 1.0)]
    pub lambda: f64,
    /// `constant:c=1`, `checkerboard:period=1,low=0.5,high=2` or `wave:frequency=1,amplitude=0.5`.
    #[arg(long, default_value = "constant:c=1")]
    pub multiplier: String,
}

/// Runs `f` on a dedicated pool of `workers` threads, or on the global pool.
pub fn with_workers<T: Send>(workers: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match workers {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build()
                .map_err(|e| Error::Internal(format!("thread pool: {e}")))?;
            Ok(pool.install(f))
        }
        None => Ok(f()),
    }
}

struct Outcome {
    n_paths: u64,
    verdict: Verdict,
    result: serde_json::Value,
    table: Option<(Vec<&'static str>, Vec<Vec<String>>)>,
}

fn cells(values: impl IntoIterator<Item = f64>) -> Vec<String> {
    values.into_iter().map(|v| v.to_string()).collect()
}

/// Runs the configured experiment; the report is identical across worker counts.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Report> {
    let (report, _) = run_with_table(cfg, None)?;
    Ok(report)
}

fn run_with_table(
    cfg: &ExperimentConfig,
    expected: Option<ExperimentKind>,
) -> Result<(Report, Option<(Vec<&'static str>, Vec<Vec<String>>)>)> {
    let kind = cfg.kind()?;
    if let Some(want) = expected {
        if want != kind {
            return Err(Error::Config(format!(
                "{}: configuration describes a `{}` experiment, not `{}`",
                cfg.origin,
                kind.as_str(),
                want.as_str()
            )));
        }
    }
    let clock = Instant::now();
    let outcome = with_workers(cfg.workers()?, || dispatch(cfg, kind))??;
    let report = Report {
        schema_version: SCHEMA_VERSION,
        experiment: kind.as_str().to_string(),
        config_digest: cfg.digest.clone(),
        seed: cfg.seed(),
        n_paths: outcome.n_paths,
        wall_time: clock.elapsed().as_secs_f64(),
        verdict: outcome.verdict,
        result: outcome.result,
    };
    Ok((report, outcome.table))
}

fn dispatch(cfg: &ExperimentConfig, kind: ExperimentKind) -> Result<Outcome> {
    match kind {
        ExperimentKind::Envelope => run_envelope(cfg),
        ExperimentKind::Exit => run_exit(cfg),
        ExperimentKind::Diag => run_diag(cfg),
        ExperimentKind::Ladder => run_ladder(cfg),
        ExperimentKind::Nash => {
            let report = nash_check(&cfg.kernel()?)?;
            let verdict = if report.pass { Verdict::Pass } else { Verdict::Fail };
            Ok(Outcome { n_paths: 0, verdict, result: report::to_value(&report)?, table: None })
        }
        ExperimentKind::Boxes => {
            let section = cfg.section(&cfg.raw.boxes, "boxes")?;
            let report = box_partition_check(section.d, section.k_max, section.points, cfg.seed())?;
            let verdict = if report.holds { Verdict::Pass } else { Verdict::Fail };
            Ok(Outcome { n_paths: 0, verdict, result: report::to_value(&report)?, table: None })
        }
        ExperimentKind::PhiCheck => {
            let phi = cfg.phi()?;
            let section = cfg.raw.phi_check.clone().unwrap_or(config::PhiCheckSection { samples: 200, delta_max: 40 });
            let (verdict, result) = phi_check(&phi, section.samples, section.delta_max)?;
            Ok(Outcome { n_paths: 0, verdict, result, table: None })
        }
    }
}

fn run_envelope(cfg: &ExperimentConfig) -> Result<Outcome> {
    let section = cfg.section(&cfg.raw.envelope, "envelope")?;
    let (sim, process) = cfg.simulation(Some(section.t))?;
    let phi = sim.phi().clone();
    let envelope_t = section.envelope_t.unwrap_or(section.t);
    let scale = phi.inverse(section.t)?;
    let (gate_ok, gate_ratio) = density_gate(&sim, scale)?;
    let terminals = simulate_terminals(&sim, process)?;
    let grid = GridSpec::around(&sim.start, section.t, &phi)?;
    let hist = empirical_density(&terminals, &grid)?;
    let report = envelope_ratio_report(&hist, envelope_t, &sim.start, &phi)?;
    let verdict = if gate_ok { report.verdict } else { Verdict::Inconclusive };
    let rows = report
        .cells
        .iter()
        .map(|c| {
            let mut row = cells(c.center.iter().copied());
            row.push(c.count.to_string());
            row.extend(cells([c.density, c.envelope, c.ratio]));
            row
        })
        .collect();
    let mut header: Vec<&'static str> = ["x0", "x1", "x2", "x3", "x4", "x5", "x6", "x7"][..sim.dim().min(8)].to_vec();
    header.extend(["count", "density", "envelope", "ratio"]);
    let result = json!({
        "t": section.t,
        "envelope_t": envelope_t,
        "gate_ratio": gate_ratio,
        "gate_ok": gate_ok,
        "grid": { "lower": grid.lower, "width": grid.width, "bins": grid.bins },
        "summary": report.summary,
        "cells": report.cells,
    });
    Ok(Outcome { n_paths: sim.n_paths, verdict, result, table: Some((header, rows)) })
}

fn run_exit(cfg: &ExperimentConfig) -> Result<Outcome> {
    let section = cfg.section(&cfg.raw.exit, "exit")?;
    match section.mode {
        config::ExitMode::Tail => {
            let t = section.t.ok_or_else(|| Error::Config(format!("{}: exit tail needs `t`", cfg.origin)))?;
            let (sim, process) = cfg.simulation(Some(t))?;
            let report = exit_time_tail(&sim, process, &sim.start, &section.radii, t)?;
            let rows = report
                .rows
                .iter()
                .map(|r| {
                    cells([r.r, r.radius, r.exits as f64, r.probability, r.normalized, r.normalized_low, r.normalized_high])
                })
                .collect();
            let header = vec!["r", "radius", "exits", "probability", "normalized", "normalized_low", "normalized_high"];
            Ok(Outcome {
                n_paths: sim.n_paths,
                verdict: report.verdict,
                result: report::to_value(&report)?,
                table: Some((header, rows)),
            })
        }
        config::ExitMode::Moments => {
            let horizon = cfg.raw.simulation.as_ref().and_then(|s| s.get_ref().horizon).unwrap_or(1.0);
            let (sim, process) = cfg.simulation(Some(horizon))?;
            let report = exit_moments(&sim, process, &sim.start, &section.radii)?;
            let rows = report
                .rows
                .iter()
                .map(|r| cells([r.r, r.mean, r.second_moment, r.ratio, r.ratio_second, r.survivors as f64]))
                .collect();
            let header = vec!["r", "mean", "second_moment", "ratio", "ratio_second", "survivors"];
            Ok(Outcome {
                n_paths: sim.n_paths,
                verdict: report.verdict,
                result: report::to_value(&report)?,
                table: Some((header, rows)),
            })
        }
    }
}

fn run_diag(cfg: &ExperimentConfig) -> Result<Outcome> {
    let section = cfg.section(&cfg.raw.diag, "diag")?;
    let horizon = section.times.iter().copied().fold(f64::NAN, f64::max);
    let (sim, process) = cfg.simulation(Some(horizon))?;
    let report = on_diagonal_check(&sim, process, &section.times, cfg.cutoff(section))?;
    let rows = report
        .rows
        .iter()
        .map(|r| cells([r.t, r.scale, r.eps, r.count as f64, r.density, r.normalized, r.gate_ratio]))
        .collect();
    let header = vec!["t", "scale", "eps", "count", "density", "normalized", "gate_ratio"];
    Ok(Outcome { n_paths: sim.n_paths, verdict: report.verdict, result: report::to_value(&report)?, table: Some((header, rows)) })
}

fn run_ladder(cfg: &ExperimentConfig) -> Result<Outcome> {
    let section = cfg.section(&cfg.raw.ladder, "ladder")?;
    let table = theta(section.d, section.alpha_lower, section.alpha_upper)?;
    let schedule = ladder_schedule(section.d, section.alpha_lower, section.alpha_upper)?;
    let sweep = if section.cases > 0 { Some(random_case_sweep(section.cases, cfg.seed())?) } else { None };
    let verdict = match &sweep {
        Some(s) if !s.violations.is_empty() => Verdict::Fail,
        _ => Verdict::Pass,
    };
    let result = json!({ "theta": table, "schedule": schedule, "cases": sweep });
    Ok(Outcome { n_paths: 0, verdict, result, table: None })
}

fn phi_check(phi: &ScalingFunction, samples: usize, delta_max: u32) -> Result<(Verdict, serde_json::Value)> {
    let ws = phi.check_ws(samples)?;
    let bounds = frak_n_bounds_check(phi, &KAPPAS, delta_max)?;
    let verdict = if ws.violations.is_empty() && bounds.holds { Verdict::Pass } else { Verdict::Fail };
    let result = json!({
        "phi": phi.to_string(),
        "certificate": phi.certificate(),
        "weak_scaling": ws,
        "frak_n_bounds": bounds,
    });
    Ok((verdict, result))
}

/// Writes one JSON line `{path_index, terminal, n_events, n_accepted[, events]}` per path in index order.
pub fn write_paths(sim: &SimConfig, process: crate::simulate::Process, out: &mut impl Write) -> Result<()> {
    let simulator = Simulator::new(sim)?;
    let io = |e: std::io::Error| Error::Internal(format!("path output: {e}"));
    let mut first = 0;
    while first < sim.n_paths {
        let count = NDJSON_CHUNK.min(sim.n_paths - first);
        let paths = map_paths(count, |i| simulator.run(process, first + i, &mut crate::simulate::Terminal))?;
        for (offset, path) in paths.iter().enumerate() {
            let mut line = json!({
                "path_index": first + offset as u64,
                "terminal": path.terminal,
                "n_events": path.diagnostics.proposed,
                "n_accepted": path.diagnostics.accepted,
            });
            if sim.record_events {
                line["events"] = report::to_value(&path.events)?;
            }
            writeln!(out, "{line}").map_err(io)?;
        }
        first += count;
    }
    Ok(())
}

fn print_json<T: serde::Serialize>(value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Internal(format!("serialization: {e}")))?;
    println!("{text}");
    Ok(())
}

fn emit(report: &Report, out: Option<&Path>) -> Result<i32> {
    match out {
        Some(path) => report.write(path)?,
        None => println!("{}", report.to_json()?),
    }
    eprintln!("{}: {}", report.experiment, report.verdict.as_str());
    Ok(report.verdict.exit_code())
}

fn run_config(args: &RunArgs, expected: Option<ExperimentKind>) -> Result<i32> {
    let cfg = ExperimentConfig::load(&args.config)?;
    let (report, table) = run_with_table(&cfg, expected)?;
    if let Some(path) = args.csv.as_ref().or(cfg.raw.csv.as_ref()) {
        match &table {
            Some((header, rows)) => report::write_csv(path, header, rows)?,
            None => return Err(Error::Config(format!("experiment `{}` has no CSV table", report.experiment))),
        }
    }
    emit(&report, args.out.as_deref().or(cfg.raw.output.as_deref()))
}

/// Executes a parsed command line and returns the process exit status.
pub fn execute(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Run(args) => run_config(&args, None),
        Command::Verify { kind, args } => {
            let kind = match kind {
                VerifyKind::Envelope => ExperimentKind::Envelope,
                VerifyKind::Exit => ExperimentKind::Exit,
                VerifyKind::Diag => ExperimentKind::Diag,
            };
            run_config(&args, Some(kind))
        }
        Command::Phi(PhiCommand::Check { phi, samples, delta_max }) => {
            let phi = ScalingFunction::parse(&phi)?;
            let (verdict, result) = phi_check(&phi, samples, delta_max)?;
            print_json(&json!({ "verdict": verdict, "result": result }))?;
            Ok(verdict.exit_code())
        }
        Command::Envelope(args) => {
            let phi = ScalingFunction::parse(&args.phi)?;
            let value = envelope_x(args.t, &args.x, &args.y, &phi)?;
            print_json(&value)?;
            Ok(0)
        }
        Command::Simulate(args) => {
            let cfg = ExperimentConfig::load(&args.config)?;
            let (sim, process) = cfg.simulation(None)?;
            let sim = sim.with_events(args.events);
            let file = std::fs::File::create(&args.out)
                .map_err(|e| Error::Config(format!("{}: cannot write: {e}", args.out.display())))?;
            let mut writer = std::io::BufWriter::new(file);
            with_workers(cfg.workers()?, || write_paths(&sim, process, &mut writer))??;
            writer.flush().map_err(|e| Error::Internal(format!("path output: {e}")))?;
            Ok(0)
        }
        Command::Ladder(args) => {
            let table = theta(args.d, args.alpha_lower, args.alpha_upper)?;
            let schedule = ladder_schedule(args.d, args.alpha_lower, args.alpha_upper)?;
            print_json(&json!({ "theta": table, "schedule": schedule }))?;
            Ok(0)
        }
        Command::Boxes(BoxesCommand::Classify { point, center, kappa }) => {
            print_json(&box_index(&point, &center, kappa)?)?;
            Ok(0)
        }
        Command::Boxes(BoxesCommand::Count { k, d }) => {
            let count = box_count(k, d)?;
            print_json(&json!({ "k": k, "d": d, "count": count.to_string() }))?;
            Ok(0)
        }
        Command::Nash(args) => {
            let phi = ScalingFunction::parse(&args.phi)?;
            let spec = KernelSpec::new(phi, args.lambda, Multiplier::parse(&args.multiplier)?, args.d)?;
            let report = nash_check(&spec)?;
            print_json(&report)?;
            Ok(if report.pass { 0 } else { 1 })
        }
    }
}

/// Status for an error: 3 for configuration and argument errors, 4 otherwise.
pub fn error_status(err: &Error) -> i32 {
    match err {
        Error::Config(_) | Error::Domain(_) => EXIT_CONFIG,
        _ => EXIT_RUNTIME,
    }
}

/// Parses `std::env::args`, runs the command and returns the exit status.
pub fn main() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { 0 };
        }
    };
    match execute(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            error_status(&e)
        }
    }
}
