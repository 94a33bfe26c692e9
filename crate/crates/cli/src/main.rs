//! `spherenav`: validate, run, diagnose and sweep scenario files.

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{ArgGroup, Parser, Subcommand};
use serde::Serialize;
use spherenav::scenario::{
    cmd_diagnose, cmd_run, cmd_sweep, cmd_validate, parse_scenario, DiagnoseTarget, Scenario, ScenarioError,
    SweepParam,
};

#[derive(Parser)]
#[command(name = "spherenav", version, about = "Safe navigation on the unit sphere")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check separation, band width, kernels, shadow regions and the gain estimate.
    Validate { file: PathBuf },
    /// Integrate every initial condition of the scenario.
    Run {
        file: PathBuf,
        /// Worker threads (defaults to all cores).
        #[arg(long)]
        parallel: Option<usize>,
        /// Directory for per-trajectory CSVs, the plot file and the summary JSON.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Finite-difference Jacobian and spectrum of the closed loop.
    #[command(group(ArgGroup::new("where").required(true).args(["at", "equilibria"])))]
    Diagnose {
        file: PathBuf,
        /// Comma-separated ambient point; repeatable.
        #[arg(long, value_parser = parse_point)]
        at: Vec<Vec<f64>>,
        /// The target and its antipode.
        #[arg(long)]
        equilibria: bool,
    },
    /// Rerun the batch for several values of one gain.
    Sweep {
        file: PathBuf,
        #[arg(long)]
        param: SweepParam,
        #[arg(long, required = true, num_args = 1.., value_delimiter = ',')]
        values: Vec<f64>,
        #[arg(long)]
        parallel: Option<usize>,
    },
}

fn parse_point(s: &str) -> Result<Vec<f64>, String> {
    s.split(',')
        .map(|c| c.trim().parse::<f64>().map_err(|e| format!("{c:?}: {e}")))
        .collect()
}

/// Exit status for "validation failure" (bad file, violated invariant, failed check).
const EXIT_INVALID: u8 = 1;
/// Exit status for failures while running.
const EXIT_RUNTIME: u8 = 2;

fn load(file: &PathBuf) -> Result<Scenario, ExitCode> {
    parse_scenario(file).map_err(|e| {
        eprintln!("error: {e}");
        match e {
            ScenarioError::Io { .. }
            | ScenarioError::ParseError { .. }
            | ScenarioError::InvariantViolation(_)
            | ScenarioError::BadSeed(_)
            | ScenarioError::Constraint(_)
            | ScenarioError::Control(_) => ExitCode::from(EXIT_INVALID),
            ScenarioError::Sim(_) => ExitCode::from(EXIT_RUNTIME),
        }
    })
}

fn print<T: Serialize>(report: &T) -> anyhow::Result<()> {
    let text = serde_json::to_string_pretty(report).context("serializing report")?;
    let mut out = std::io::stdout().lock();
    match writeln!(out, "{text}").and_then(|_| out.flush()) {
        // a closed pipe (e.g. `| head`) is not an error
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e).context("writing report"),
        _ => Ok(()),
    }
}

fn execute(cmd: Command) -> anyhow::Result<ExitCode> {
    let file = match &cmd {
        Command::Validate { file }
        | Command::Run { file, .. }
        | Command::Diagnose { file, .. }
        | Command::Sweep { file, .. } => file.clone(),
    };
    let sc = match load(&file) {
        Ok(s) => s,
        Err(code) => return Ok(code),
    };
    let runtime = |e: ScenarioError| -> anyhow::Result<ExitCode> {
        eprintln!("error: {e}");
        Ok(ExitCode::from(EXIT_RUNTIME))
    };
    match cmd {
        Command::Validate { .. } => {
            let report = match cmd_validate(&sc) {
                Ok(r) => r,
                Err(e) => return runtime(e),
            };
            print(&report)?;
            for f in &report.failures {
                eprintln!("FAIL {f}");
            }
            Ok(if report.ok {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(EXIT_INVALID)
            })
        }
        Command::Run { parallel, out, .. } => {
            let (report, _) = match cmd_run(&sc, parallel, out.as_deref()) {
                Ok(r) => r,
                Err(e) => return runtime(e),
            };
            print(&report)?;
            eprintln!(
                "{}: {}/{} converged, {}/{} safe",
                report.scenario, report.converged, report.total, report.safe, report.total
            );
            Ok(if report.all_ok() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(EXIT_RUNTIME)
            })
        }
        Command::Diagnose { at, equilibria, .. } => {
            let target = if equilibria {
                DiagnoseTarget::Equilibria
            } else {
                DiagnoseTarget::Points(at)
            };
            let report = match cmd_diagnose(&sc, &target) {
                Ok(r) => r,
                Err(e) => return runtime(e),
            };
            print(&report)?;
            for p in &report.points {
                if let Some(n) = &p.note {
                    eprintln!("{}: {n}", p.label);
                }
                if let Some(e) = &p.error {
                    eprintln!("{}: {e}", p.label);
                }
            }
            Ok(if report.points.iter().all(|p| p.error.is_none()) {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(EXIT_RUNTIME)
            })
        }
        Command::Sweep {
            param,
            values,
            parallel,
            ..
        } => {
            let report = match cmd_sweep(&sc, param, &values, parallel) {
                Ok(r) => r,
                Err(e) => return runtime(e),
            };
            print(&report)?;
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_RUNTIME)
        }
    }
}
