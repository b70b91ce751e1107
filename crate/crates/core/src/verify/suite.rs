use super::checks::*;
use super::registry::{lookup, CHECKS};
use super::report::CheckReport;
use super::setup::{
    box_indicator, half_step, middle_cell, random_field, rng, rough_mean_zero, solve_at, time_pairs, Setup,
};
use crate::coeffs::{make_scenario, CoefficientField, Scenario};
use crate::evolve::{Propagator, Scheme};
use crate::grid::{Grid, SpaceField};
use crate::norms::NormConfig;
use crate::{Error, Result, DENSE_CELL_LIMIT};

/// Per-check overrides; `None` selects the defaults.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct CheckOptions {
    /// Exponents for `max_square`; the first one is used by `bv_uniformity`.
    pub exponents: Option<Vec<f64>>,
    pub jump_counts: Option<Vec<usize>>,
    pub budget: Option<f64>,
    pub budgets: Option<Vec<f64>>,
    /// `d²/(t−s)` values for `offdiagonal`.
    pub ratios: Option<Vec<f64>>,
    /// Truncation and scales for `max_square`; the exponent field is ignored.
    pub norms: Option<NormConfig>,
}

pub const DEFAULT_EXPONENTS: [f64; 3] = [1.0, 2.0, 4.0];
pub const DEFAULT_RATIOS: [f64; 5] = [1.0, 4.0, 9.0, 16.0, 25.0];
pub const DEFAULT_BV_EXPONENT: f64 = 1.5;

/// All registered check ids, sorted.
pub fn check_ids() -> Vec<&'static str> {
    CHECKS.iter().map(|c| c.id).collect()
}

/// Autonomous field made of the first piece of `field`.
fn first_piece(field: &CoefficientField) -> Result<CoefficientField> {
    CoefficientField::autonomous(*field.grid(), field.horizon(), field.piece(0).to_vec())
}

/// Grids for the maximal-regularity refinement pair: `(32, 64)` points per
/// axis in one dimension, `(8, 16)` in two.
fn maxreg_points(dim: usize) -> (usize, usize) {
    if dim == 1 {
        (32, 64)
    } else {
        (8, 16)
    }
}

/// Exact-exponential propagator on the same field when it fits, for checks
/// whose tolerance presumes exact time stepping.
fn exact_or_given(setup: &Setup, prop: Propagator, r_note: &mut Option<String>) -> Result<Propagator> {
    if setup.scheme == Scheme::ExactExpm || setup.grid.cells() > DENSE_CELL_LIMIT / 4 {
        return Ok(prop);
    }
    *r_note = Some("evaluated with exact_expm on the configured field".into());
    Propagator::build(setup.field()?, Scheme::ExactExpm)
}

/// Runs the check `id` on `setup` with its default data.
pub fn run_check(id: &str, setup: &Setup, options: &CheckOptions) -> Result<CheckReport> {
    let info = lookup(id).ok_or_else(|| Error::InvalidArgument(format!("unknown check `{id}`")))?;
    let grid = setup.grid;
    let horizon = setup.horizon;
    let pairs = time_pairs(horizon);
    let mut extra_note = None;
    let mut report = match info.id {
        "contraction" => check_contraction(&setup.propagator()?, &pairs)?,
        "conservation" => check_conservation(&setup.propagator()?, &pairs)?,
        "offdiagonal" => {
            let ratios = options.ratios.clone().unwrap_or(DEFAULT_RATIOS.to_vec());
            check_offdiagonal_ratios(&setup.propagator()?, &ratios)?
        }
        "norm_equivalence" => {
            let prop = exact_or_given(setup, setup.propagator()?, &mut extra_note)?;
            check_norm_equivalence(&prop, &rough_mean_zero(&grid))?
        }
        "energy" => {
            let prop = exact_or_given(setup, setup.propagator()?, &mut extra_note)?;
            check_energy_equality(&prop, &rough_mean_zero(&grid), horizon)?
        }
        "struct_bound" => {
            let prop = exact_or_given(setup, setup.propagator()?, &mut extra_note)?;
            check_struct_bound(&prop, &rough_mean_zero(&grid))?
        }
        "interior_representation" => interior_representation(setup)?,
        "reverse_holder" => {
            let c = 0.5 * grid.period();
            let datum = move |g: &Grid| box_indicator(g, [c, c], g.period() / 16.0);
            check_reverse_holder(&setup.propagator()?, &setup.refined()?.propagator()?, &datum)?
        }
        "local_energy" => {
            let u0 = random_field(&grid, &mut rng(setup.seed, 7));
            let cyl = Cylinder {
                center: middle_cell(&grid),
                radius: (grid.period() / 8.0).max(3.0 * grid.spacing()),
                a: 0.25 * horizon,
                b: horizon,
                c: 0.625 * horizon,
            };
            check_local_energy(&setup.propagator()?, &u0, &cyl)?
        }
        "max_square" => {
            let exps = options.exponents.clone().unwrap_or(DEFAULT_EXPONENTS.to_vec());
            let base = match &options.norms {
                Some(n) => n.clone(),
                None => NormConfig::dyadic(horizon, 15, 1.0)?,
            };
            check_max_square(&setup.propagator()?, &setup.refined()?.propagator()?, &rough_mean_zero, &exps, &base)?
        }
        "whitney_fatou" => check_whitney_fatou(&setup.propagator()?, &half_step(&grid), &[0.0, 0.5 * grid.period()])?,
        "bv_uniformity" => {
            let mut family = BvFamily::default();
            if let Scenario::BvStaircase { imag, blocks, .. } = &setup.scenario {
                family.imag = *imag;
                family.blocks = *blocks;
            }
            if let Some(k) = &options.jump_counts {
                family.jump_counts = k.clone();
            }
            if let Some(b) = options.budget {
                family.budget = b;
            }
            if let Some(b) = &options.budgets {
                family.budgets = b.clone();
            }
            let p = options.exponents.as_ref().and_then(|e| e.first().copied()).unwrap_or(DEFAULT_BV_EXPONENT);
            check_bv_uniformity(grid, setup.scheme, horizon, p, &family)?
        }
        "kernel_gaussian" => check_kernel_gaussian(&setup.propagator()?, &setup.refined()?.propagator()?)?,
        "duhamel" => {
            let reference = make_scenario(&Scenario::Heat {}, grid, horizon, setup.seed)?;
            check_duhamel(&setup.propagator()?, &reference, &rough_mean_zero(&grid), horizon)?
        }
        "maxreg" => {
            let (nc, nf) = maxreg_points(grid.dim());
            let coarse = first_piece(&setup.with_points(nc)?.field()?)?;
            let fine = first_piece(&setup.with_points(nf)?.field()?)?;
            let mut r = check_maxreg(&coarse, &fine, setup.seed)?;
            r.note(format!("first coefficient piece on grids with {nc} and {nf} points per axis"));
            r
        }
        "norm_identities" => check_norm_identities(grid, 50, setup.seed)?,
        other => unreachable!("registered check {other} without a runner"),
    };
    if let Some(n) = extra_note {
        report.note(n);
    }
    Ok(report)
}

/// `u = Γ(·,0)u₀` at `{T/4, T}` checked against 10 random `h`; when the
/// configured scheme is exact, a Crank–Nicolson solution is paired with the
/// exact adjoint as a cross-scheme diagnostic.
fn interior_representation(setup: &Setup) -> Result<CheckReport> {
    let grid = setup.grid;
    let prop = setup.propagator()?;
    let (s, t) = (0.25 * setup.horizon, setup.horizon);
    let u0 = rough_mean_zero(&grid);
    let mut r = rng(setup.seed, 3);
    let hs: Vec<SpaceField> = (0..10).map(|_| random_field(&grid, &mut r)).collect();
    let u = solve_at(&prop, &u0, &[s, t])?;
    let mut report = check_interior_representation(&prop, &u, s, t, &hs)?;
    if setup.scheme == Scheme::ExactExpm {
        let cn = Propagator::build(setup.field()?, Scheme::CrankNicolson { substeps: None })?;
        let ucn = solve_at(&cn, &u0, &[s, t])?;
        report.record("cross_scheme_residual", pairing_residual(&prop, &ucn, s, t, &hs)?);
    }
    Ok(report)
}

/// Turns a check error into a failed report so one broken check does not
/// hide the others.
pub fn run_check_reported(id: &str, setup: &Setup, options: &CheckOptions) -> CheckReport {
    match run_check(id, setup, options) {
        Ok(r) => r,
        Err(e) => {
            let info = lookup(id);
            let mut r = CheckReport::new(
                info.map(|i| i.id).unwrap_or(id),
                info.map(|i| i.tolerance).unwrap_or(0.0),
                info.map(|i| i.policy).unwrap_or(""),
            );
            r.note(format!("error: {e}"));
            r.compare("error", 1.0, 0.0, "check raised an error");
            r
        }
    }
}
