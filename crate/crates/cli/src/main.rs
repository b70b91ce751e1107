//! Command-line scenario runner: loads a JSON config, runs the requested
//! checks and writes `report.json` and `checks.csv`.
//!
//! Exit status: 0 when every check passes (skipped checks do not count as
//! failures), 2 when a check fails, 1 on configuration or runtime errors.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod config;
mod run;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use tentlab_core::verify::CHECKS;

#[derive(Parser)]
#[command(name = "tentlab", version, about = "Run verification suites for parabolic propagators on a periodic grid")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the checks listed in a scenario config.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory; defaults to `output_dir` from the config.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write binary dumps of kernel columns and coefficients.
        #[arg(long)]
        dump_kernels: bool,
        /// Overrides `coefficients.seed`.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Print every check id with the estimate it tests and its default tolerance.
    ListChecks,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Run { config, out, dump_kernels, seed } => run_command(config, out, dump_kernels, seed),
        Command::ListChecks => list_checks().map(|_| 0),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn run_command(path: PathBuf, out: Option<PathBuf>, dump_kernels: bool, seed: Option<u64>) -> Result<u8> {
    let mut raw = config::load(&path)?;
    if let Some(s) = seed {
        raw.coefficients.seed = s;
    }
    let dir = path.parent().map(PathBuf::from).unwrap_or_default();
    let cfg = raw.resolve(&dir).with_context(|| format!("invalid config {}", path.display()))?;
    let out = out
        .or_else(|| cfg.output_dir.clone())
        .context("no output directory: pass --out or set output_dir in the config")?;
    let verdict = run::execute(&cfg, &run::RunOptions { out, dump_kernels })?;
    Ok(run::exit_code(verdict))
}

fn format_tolerance(t: f64) -> String {
    if t == 0.0 || t >= 1e-3 {
        format!("{t}")
    } else {
        format!("{t:e}")
    }
}

fn list_checks() -> Result<()> {
    let mut out = std::io::stdout().lock();
    writeln!(out, "{:<24} {:<10} estimate / pass rule", "id", "tolerance")?;
    for c in CHECKS {
        writeln!(out, "{:<24} {:<10} {}", c.id, format_tolerance(c.tolerance), c.estimate)?;
        writeln!(out, "{:<24} {:<10} {}", "", "", c.policy)?;
    }
    Ok(())
}
