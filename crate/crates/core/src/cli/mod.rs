//! Command-line experiment runner.
//!
//! Every subcommand reads one JSON run file (`--run`) and writes its
//! artifacts and a `manifest.json` into one directory (`--out`, or the run
//! file's `output_dir`). Exit status is 0 on success, 1 on input errors and
//! 2 when a verdict or consistency check fails.

pub mod experiments;
pub mod output;
pub mod runfile;
pub mod sweep;

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use experiments::{run_experiment, seeds, ExperimentOutcome};
use output::{Artifact, ArtifactSink};
use runfile::{ExperimentKind, RunFile};
use sweep::{run_sweep, RowStatus, SweepFile};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 1;
pub const EXIT_CONSISTENCY: i32 = 2;

/// Exit status for an error.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::VerdictMismatch(_) => EXIT_CONSISTENCY,
        _ => EXIT_INPUT,
    }
}

#[derive(Debug, Parser)]
#[command(name = "gbm-coupling", version, about = "Optimal coupling of two geometric Brownian motions")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Print the experiment summary.
    #[arg(long, global = true)]
    pub verbose: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Closed forms: `derive` or `analytic-table` run files.
    Analytic(IoArgs),
    /// Monte Carlo coupling times under a policy.
    Simulate(IoArgs),
    /// Grid value function, control field and gap report.
    Hjb(IoArgs),
    /// Any experiment, including the reproductions.
    Run(IoArgs),
    /// One experiment over a grid of specifications.
    Sweep(IoArgs),
}

#[derive(Debug, Args)]
pub struct IoArgs {
    /// JSON run file.
    #[arg(long)]
    pub run: PathBuf,
    /// Output directory; overrides the run file's `output_dir`.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Result of a completed run.
#[derive(Debug)]
pub struct RunReport {
    pub outcome: ExperimentOutcome,
    pub artifacts: Vec<Artifact>,
    pub exit_code: i32,
}

fn manifest(
    kind: &str,
    input: Value,
    seeds: Vec<u64>,
    started: Instant,
    status: Value,
    artifacts: &[Artifact],
) -> Value {
    json!({
        "tool": env!("CARGO_PKG_NAME"),
        "version": env!("CARGO_PKG_VERSION"),
        "experiment": kind,
        "input": input,
        "seeds": seeds,
        "threads": rayon::current_num_threads(),
        "wall_time_seconds": started.elapsed().as_secs_f64(),
        "status": status,
        "artifacts": artifacts,
    })
}

/// Runs `run` and writes its artifacts and manifest into `out`.
pub fn execute(run: &RunFile, out: &Path) -> Result<RunReport> {
    let started = Instant::now();
    let mut sink = ArtifactSink::new(out)?;
    let input = run.to_value()?;
    let result = run_experiment(&run.spec, &run.params, &mut sink);
    let (status, ret) = match result {
        Ok(outcome) => {
            let code = if outcome.passed() { EXIT_OK } else { EXIT_CONSISTENCY };
            let status = json!({"exit_code": code, "checks": outcome.checks});
            (status, Ok((outcome, code)))
        }
        Err(e) => {
            let status = json!({"exit_code": exit_code(&e), "error": e.reason(), "message": e.to_string()});
            (status, Err(e))
        }
    };
    let artifacts = sink.artifacts().to_vec();
    let m = manifest(run.kind().as_str(), input, seeds(&run.params), started, status, &artifacts);
    sink.json("manifest.json", &m)?;
    let (outcome, exit_code) = ret?;
    Ok(RunReport { outcome, artifacts, exit_code })
}

/// Runs a sweep and writes `sweep.csv`, the row directories and a manifest.
pub fn execute_sweep(file: &SweepFile, out: &Path) -> Result<(sweep::SweepResult, i32)> {
    let started = Instant::now();
    let mut sink = ArtifactSink::new(out)?;
    let result = run_sweep(file, &mut sink)?;
    let code = if result.any(RowStatus::ConsistencyFailure) {
        EXIT_CONSISTENCY
    } else if result.any(RowStatus::Error) {
        EXIT_INPUT
    } else {
        EXIT_OK
    };
    let mut input = file.base.to_value()?;
    input["sweep"] = serde_json::to_value(&file.grid)?;
    let status = json!({
        "exit_code": code,
        "rows": result.rows.len(),
        "failed_rows": result.rows.iter().filter(|r| r.status != RowStatus::Ok).map(|r| r.index).collect::<Vec<_>>(),
    });
    let artifacts = sink.artifacts().to_vec();
    let m = manifest("sweep", input, seeds(&file.base.params), started, status, &artifacts);
    sink.json("manifest.json", &m)?;
    Ok((result, code))
}

fn allowed(command: &Command) -> (Option<ExperimentKind>, &'static [ExperimentKind]) {
    use ExperimentKind::*;
    match command {
        Command::Analytic(_) => (Some(AnalyticTable), &[Derive, AnalyticTable]),
        Command::Simulate(_) => (Some(Simulate), &[Simulate]),
        Command::Hjb(_) => (Some(Hjb), &[Hjb]),
        Command::Run(_) | Command::Sweep(_) => (None, &ExperimentKind::ALL),
    }
}

fn output_dir(io: &IoArgs, declared: Option<&PathBuf>) -> Result<PathBuf> {
    io.out
        .clone()
        .or_else(|| declared.cloned())
        .ok_or_else(|| Error::RunFile("no output directory: pass --out or set output_dir".into()))
}

fn report_error(e: &Error) -> i32 {
    let line = json!({"error": e.reason(), "message": e.to_string()});
    eprintln!("{line}");
    exit_code(e)
}

fn dispatch(cli: &Cli) -> Result<i32> {
    let io = match &cli.command {
        Command::Analytic(a) | Command::Simulate(a) | Command::Hjb(a) | Command::Run(a) | Command::Sweep(a) => a,
    };
    if let Command::Sweep(_) = cli.command {
        let file = SweepFile::load(&io.run)?;
        let out = output_dir(io, file.base.output_dir.as_ref())?;
        let (result, code) = execute_sweep(&file, &out)?;
        for r in &result.rows {
            if r.status != RowStatus::Ok {
                eprintln!("row {}: {:?}", r.index, r.status);
            }
        }
        println!("sweep: {} rows -> {}", result.rows.len(), out.join("sweep.csv").display());
        return Ok(code);
    }
    let (default_kind, permitted) = allowed(&cli.command);
    let run = RunFile::load(&io.run, default_kind)?;
    if !permitted.contains(&run.kind()) {
        return Err(Error::RunFile(format!(
            "experiment {} cannot run under this subcommand",
            run.kind().as_str()
        )));
    }
    let out = output_dir(io, run.output_dir.as_ref())?;
    let report = execute(&run, &out)?;
    for c in &report.outcome.checks {
        println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    if cli.verbose {
        println!("{}", serde_json::to_string_pretty(&report.outcome.summary)?);
    }
    println!("{}: {} artifacts -> {}", run.kind().as_str(), report.artifacts.len(), out.display());
    Ok(report.exit_code)
}

/// Entry point of the binary: parses `args` and returns the exit status.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.threads {
        if n == 0 {
            return report_error(&Error::RunFile("--threads must be at least 1".into()));
        }
        builder = builder.num_threads(n);
    }
    let pool = match builder.build() {
        Ok(p) => p,
        Err(e) => return report_error(&Error::Precondition(e.to_string())),
    };
    pool.install(|| match dispatch(&cli) {
        Ok(code) => code,
        Err(e) => report_error(&e),
    })
}
