use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use rayon::prelude::*;
use serde_json::{json, Value};
use tentlab_core::coeffs::{check_ellipticity, CoefficientField};
use tentlab_core::norms::{bochner_norms, exponent_label, tent_norm, xp_norm, NormReport};
use tentlab_core::verify::{
    geometric_times, lookup, middle_cell, rough_mean_zero, run_check, solve_at, CheckReport, CheckStatus, Setup,
};
use tentlab_core::Complex64;

use crate::config::Config;

/// Exit status of a run whose configuration was valid.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    Passed,
    Failed,
    Errored,
}

struct Outcome {
    report: CheckReport,
    wall_ms: f64,
    error: bool,
}

pub struct RunOptions {
    pub out: PathBuf,
    pub dump_kernels: bool,
}

pub fn execute(cfg: &Config, opts: &RunOptions) -> Result<Verdict> {
    let setup = Setup {
        scenario: cfg.scenario.clone(),
        grid: cfg.grid,
        scheme: cfg.scheme,
        horizon: cfg.horizon,
        seed: cfg.seed,
    };
    let field = setup.field().context("building the coefficient field")?;
    let ellipticity = check_ellipticity(&field).context("ellipticity")?;
    fs::create_dir_all(&opts.out).with_context(|| format!("cannot create {}", opts.out.display()))?;

    let workers = cfg.workers.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    let pool = rayon::ThreadPoolBuilder::new().num_threads(workers).build().context("worker pool")?;
    let outcomes: Vec<Outcome> = pool.install(|| {
        cfg.checks
            .par_iter()
            .map(|req| {
                let start = Instant::now();
                let (report, error) = match run_check(req.id, &setup, &req.options) {
                    Ok(r) => (r, false),
                    Err(e) => (error_report(req.id, &e.to_string()), true),
                };
                Outcome { report, wall_ms: start.elapsed().as_secs_f64() * 1e3, error }
            })
            .collect()
    });
    let norms = reference_norms(cfg, &setup).context("reference norms")?;

    let errors = outcomes.iter().filter(|o| o.error).count();
    let failed = outcomes.iter().filter(|o| o.report.failed()).count();
    let skipped = outcomes.iter().filter(|o| o.report.status == CheckStatus::Skipped).count();
    let verdict = if errors > 0 {
        Verdict::Errored
    } else if failed > 0 {
        Verdict::Failed
    } else {
        Verdict::Passed
    };

    let report = json!({
        "tool": { "name": env!("CARGO_PKG_NAME"), "version": env!("CARGO_PKG_VERSION") },
        "config": cfg.to_json(),
        "ellipticity": ellipticity,
        "field": {
            "pieces": field.piece_count(),
            "breakpoints": field.breakpoints(),
            "bv": field.bv(),
            "real": field.is_real(),
        },
        "norms": norms,
        "summary": {
            "checks": outcomes.len(),
            "passed": outcomes.len() - failed - skipped,
            "failed": failed,
            "skipped": skipped,
            "errors": errors,
            "exit_status": exit_code(verdict),
        },
        "checks": outcomes.iter().map(|o| &o.report).collect::<Vec<_>>(),
    });
    write_json(&opts.out.join("report.json"), &report)?;
    write_csv(&opts.out.join("checks.csv"), cfg.scenario.name(), &outcomes)?;
    if opts.dump_kernels {
        let dir = opts.out.join("dumps");
        fs::create_dir_all(&dir)?;
        dump_coefficients(&dir, &field)?;
        dump_kernels(&dir, &setup)?;
    }

    let mut stdout = std::io::stdout().lock();
    for o in &outcomes {
        let tag = match (o.error, o.report.status) {
            (true, _) => "ERROR",
            (false, CheckStatus::Passed) => "PASS",
            (false, CheckStatus::Failed) => "FAIL",
            (false, CheckStatus::Skipped) => "SKIP",
        };
        writeln!(stdout, "{tag:<5} {:<24} {:>10.1} ms", o.report.check_id, o.wall_ms)?;
        if o.error || o.report.status == CheckStatus::Skipped {
            for n in &o.report.notes {
                writeln!(stdout, "      {n}")?;
            }
        }
    }
    writeln!(
        stdout,
        "{} checks: {} passed, {failed} failed, {skipped} skipped, {errors} errors; report in {}",
        outcomes.len(),
        outcomes.len() - failed - skipped,
        opts.out.display()
    )?;
    Ok(verdict)
}

pub fn exit_code(v: Verdict) -> u8 {
    match v {
        Verdict::Passed => 0,
        Verdict::Failed => 2,
        Verdict::Errored => 1,
    }
}

fn error_report(id: &str, message: &str) -> CheckReport {
    let info = lookup(id).expect("ids are validated before running");
    let mut r = CheckReport::new(info.id, info.tolerance, info.policy);
    r.note(format!("error: {message}"));
    r.compare("error", 1.0, 0.0, "check raised an error");
    r
}

/// Norms of `u = Γ(·,0)u₀` for the mean-zero box datum under the configured
/// truncation and exponents.
fn reference_norms(cfg: &Config, setup: &Setup) -> Result<NormReport> {
    let prop = setup.propagator()?;
    let octaves = (cfg.horizon / cfg.norms.t_min).log2().ceil().clamp(1.0, 24.0) as u32;
    let mut times = vec![0.0];
    times.extend(geometric_times(cfg.horizon, octaves, 4));
    let u = solve_at(&prop, &rough_mean_zero(&cfg.grid), &times)?;
    let grad = u.gradient_field()?;
    let mut report = bochner_norms(&u, &cfg.exponents, true)?;
    for &p in &cfg.exponents {
        let label = exponent_label(p);
        let nc = cfg.norms.with_p(p)?;
        report.values.insert(format!("tent_grad/p={label}"), tent_norm(&grad, p, &nc)?);
        report.values.insert(format!("xp/p={label}"), xp_norm(&u, p, &nc)?);
    }
    report.provenance = format!(
        "u = Γ(·,0)u₀ for the mean-zero box datum; {}; t_min = {}, {} dyadic scales",
        report.provenance,
        cfg.norms.t_min,
        cfg.norms.delta_grid.len()
    );
    Ok(report)
}

fn write_json(path: &Path, value: &Value) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}

fn write_csv(path: &Path, scenario: &str, outcomes: &[Outcome]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("cannot write {}", path.display()))?;
    w.write_record(["check_id", "key", "scenario", "measured", "bound", "slack", "pass", "wall_ms"])?;
    for o in outcomes {
        let id = o.report.check_id.as_str();
        let wall = format!("{:.3}", o.wall_ms);
        let rows = o.report.rows();
        if o.report.status == CheckStatus::Skipped || rows.is_empty() {
            let pass = if o.report.status == CheckStatus::Skipped { "skipped" } else { bool_str(o.report.pass) };
            w.write_record([id, "", scenario, "", "", "", pass, &wall])?;
        }
        for row in rows {
            w.write_record([
                id,
                &row.key,
                scenario,
                &row.measured.to_string(),
                &row.bound.to_string(),
                &row.slack.to_string(),
                bool_str(row.pass),
                &wall,
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

fn bool_str(b: bool) -> &'static str {
    if b {
        "true"
    } else {
        "false"
    }
}

fn write_pairs(path: &Path, values: impl Iterator<Item = Complex64>) -> Result<()> {
    let mut bytes = Vec::new();
    for z in values {
        bytes.extend_from_slice(&z.re.to_le_bytes());
        bytes.extend_from_slice(&z.im.to_le_bytes());
    }
    fs::write(path, bytes).with_context(|| format!("cannot write {}", path.display()))
}

fn dump_coefficients(dir: &Path, field: &CoefficientField) -> Result<()> {
    let grid = field.grid();
    write_pairs(&dir.join("coefficients.bin"), field.pieces().iter().flatten().copied())?;
    write_json(
        &dir.join("coefficients.json"),
        &json!({
            "format": "little-endian f64 pairs (re, im)",
            "order": ["piece", "cell", "row", "column"],
            "shape": [field.piece_count(), grid.cells(), grid.dim(), grid.dim()],
            "grid": { "dim": grid.dim(), "n": grid.points_per_axis(), "period": grid.period() },
            "breakpoints": field.breakpoints(),
        }),
    )
}

/// Columns `k(t, 0, ·, y)` for the middle cell `y` at `t ∈ {T/4, T/2, T}`.
fn dump_kernels(dir: &Path, setup: &Setup) -> Result<()> {
    let prop = setup.propagator()?;
    let grid = setup.grid;
    let source = middle_cell(&grid);
    let times: Vec<f64> = [0.25, 0.5, 1.0].iter().map(|f| f * setup.horizon).collect();
    let mut values = Vec::with_capacity(times.len() * grid.cells());
    for &t in &times {
        values.extend_from_slice(prop.kernel_column(t, 0.0, source)?.values());
    }
    write_pairs(&dir.join("kernels.bin"), values.into_iter())?;
    write_json(
        &dir.join("kernels.json"),
        &json!({
            "format": "little-endian f64 pairs (re, im)",
            "order": ["time", "cell"],
            "shape": [times.len(), grid.cells()],
            "times": times,
            "s": 0.0,
            "source_cell": source,
            "source_center": &grid.center(source)[..grid.dim()],
            "grid": { "dim": grid.dim(), "n": grid.points_per_axis(), "period": grid.period() },
        }),
    )
}
