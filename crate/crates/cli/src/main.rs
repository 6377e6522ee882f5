//! `piezolab`: simulate, analyze and verify the damped piezoelectric beam.
//!
//! Exit codes: 0 success, 2 configuration error, 3 numerical or check failure.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{Ctx, Failure, Fault};
use config::{split_overrides, RunConfig};
use report::{to_json, OutputDir, RunReport, RunStatus, Timings};

#[derive(Parser, Debug)]
#[command(
    name = "piezolab",
    version,
    about = "Modal Galerkin laboratory for the damped 2D piezoelectric beam",
    after_help = "Any config key can be overridden as --section.key VALUE, e.g. --damping.d0 0 --grid.n 64."
)]
struct Cli {
    /// INI configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "piezolab-out")]
    out: PathBuf,
    /// Worker threads for the parallel maps (default: all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Seed of randomized checks (overrides run.seed).
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Integrate the modal system and write the energy history.
    Simulate,
    /// Dense spectra and spectral abscissae of modes 0..=j_max.
    Spectrum,
    /// Sweep of the resolvent norm along the imaginary axis.
    Resolvent,
    /// Power-law fit of the energy decay.
    Decay {
        /// Fit an existing `t,E[,P]` CSV instead of simulating.
        #[arg(long)]
        series_from_file: Option<PathBuf>,
    },
    /// Run the invariant battery and print a pass/fail table.
    Check {
        #[arg(long, hide = true, value_enum)]
        inject_fault: Option<Fault>,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Spectrum => "spectrum",
            Command::Resolvent => "resolvent",
            Command::Decay { .. } => "decay",
            Command::Check { .. } => "check",
        }
    }
}

fn load_config(cli: &Cli, overrides: &[(String, String)]) -> Result<RunConfig, String> {
    let mut c = RunConfig::default();
    if let Some(path) = &cli.config {
        c.apply_file(path).map_err(|e| e.0)?;
    }
    c.apply_overrides(overrides).map_err(|e| e.0)?;
    if let Some(seed) = cli.seed {
        c.run.seed = seed;
    }
    c.validate().map_err(|e| e.0)?;
    Ok(c)
}

/// Bytes mixed into the fingerprint besides the configuration.
fn fingerprint_extra(cmd: &Command) -> Result<Vec<u8>, String> {
    match cmd {
        Command::Decay {
            series_from_file: Some(path),
        } => std::fs::read(path).map_err(|e| format!("cannot read {}: {e}", path.display())),
        Command::Check {
            inject_fault: Some(f),
        } => Ok(format!("fault:{f:?}").into_bytes()),
        _ => Ok(Vec::new()),
    }
}

fn emit(out: &mut Option<OutputDir>, report: &RunReport, timings: &Timings) {
    let Some(dir) = out else { return };
    let mut report = report.clone();
    report.files = dir.written().to_vec();
    report.files.push(dir.path("report.json"));
    report.files.push(dir.path("timings.json"));
    if let Err(e) = dir.write("report.json", &to_json(&report)) {
        eprintln!("piezolab: cannot write report: {e}");
    }
    if let Err(e) = dir.write("timings.json", &to_json(timings)) {
        eprintln!("piezolab: cannot write timings: {e}");
    }
}

fn run() -> ExitCode {
    let (args, overrides) = match split_overrides(std::env::args()) {
        Ok(v) => v,
        Err(e) => {
            eprintln!("piezolab: config error: {e}");
            return ExitCode::from(2);
        }
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => e.exit(),
    };
    let name = cli.command.name();
    let mut report = RunReport {
        command: name.to_string(),
        version: report::version(),
        fingerprint: String::new(),
        status: RunStatus::Ok,
        failure: None,
        message: None,
        config: None,
        checks: Vec::new(),
        files: Vec::new(),
    };

    let prepared = load_config(&cli, &overrides).and_then(|c| Ok((fingerprint_extra(&cli.command)?, c)));
    let (extra, config) = match prepared {
        Ok(v) => v,
        Err(msg) => {
            eprintln!("piezolab: config error: {msg}");
            report.status = RunStatus::ConfigError;
            report.failure = Some("config".into());
            report.message = Some(msg);
            report.fingerprint = "invalid-config".into();
            let mut out = OutputDir::new(&cli.out, name, "invalid-config").ok();
            let timings = Timings {
                fingerprint: report.fingerprint.clone(),
                phases: Vec::new(),
            };
            emit(&mut out, &report, &timings);
            return ExitCode::from(RunStatus::ConfigError.exit_code());
        }
    };
    if let Some(w) = cli.workers {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(w.max(1)).build_global() {
            eprintln!("piezolab: cannot size the worker pool: {e}");
        }
    }
    let fingerprint = config.fingerprint(&extra);
    report.fingerprint = fingerprint.clone();
    report.config = Some(config.clone());
    let out = match OutputDir::new(&cli.out, name, &fingerprint) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("piezolab: cannot create {}: {e}", cli.out.display());
            return ExitCode::from(3);
        }
    };
    let mut ctx = Ctx {
        config: &config,
        out,
        checks: Vec::new(),
        timings: Vec::new(),
    };
    let result = match &cli.command {
        Command::Simulate => commands::cmd_simulate(&mut ctx),
        Command::Spectrum => commands::cmd_spectrum(&mut ctx, &fingerprint),
        Command::Resolvent => commands::cmd_resolvent(&mut ctx),
        Command::Decay { series_from_file } => commands::cmd_decay(&mut ctx, series_from_file.as_deref()),
        Command::Check { inject_fault } => commands::cmd_check(&mut ctx, *inject_fault),
    };
    report.checks = ctx.checks.clone();
    match result {
        Ok(()) => {
            let failed: Vec<&str> = report
                .checks
                .iter()
                .filter(|c| c.failed())
                .map(|c| c.name.as_str())
                .collect();
            if !failed.is_empty() {
                report.status = RunStatus::CheckFailure;
                report.failure = Some(failed.join(","));
            }
        }
        Err(Failure::Config(msg)) => {
            report.status = RunStatus::ConfigError;
            report.failure = Some("config".into());
            report.message = Some(msg);
        }
        Err(Failure::Numerical { phase, error }) => {
            report.status = RunStatus::NumericalFailure;
            report.failure = Some(phase);
            report.message = Some(format!("{}: {error}", error.kind()));
        }
        Err(Failure::Io(msg)) => {
            report.status = RunStatus::NumericalFailure;
            report.failure = Some("io".into());
            report.message = Some(msg);
        }
    }

    for c in &report.checks {
        let status = match c.status {
            report::CheckStatus::Pass => "PASS",
            report::CheckStatus::Fail => "FAIL",
            report::CheckStatus::Skipped => "SKIP",
        };
        println!("{status:<5} {:<28} {}", c.name, c.detail);
    }
    let timings = Timings {
        fingerprint: fingerprint.clone(),
        phases: ctx.timings.clone(),
    };
    let mut out = Some(ctx.out);
    emit(&mut out, &report, &timings);
    match report.status {
        RunStatus::Ok => println!("{name}: ok ({fingerprint})"),
        status => {
            let what = report.failure.as_deref().unwrap_or("unknown");
            let msg = report.message.as_deref().unwrap_or("");
            let kind = if status == RunStatus::ConfigError { "config error" } else { "failed" };
            eprintln!("piezolab: {name} {kind} at {what}{}{msg}", if msg.is_empty() { "" } else { ": " });
        }
    }
    ExitCode::from(report.status.exit_code())
}

fn main() -> ExitCode {
    run()
}
