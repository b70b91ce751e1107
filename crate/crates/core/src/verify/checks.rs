use ndarray::Axis;
use num_complex::Complex64;
use rand::Rng;

use super::registry::lookup;
use super::report::CheckReport;
use super::setup::{geometric_times, middle_cell, random_field, rng, solve_at};
use crate::coeffs::{make_scenario, CoefficientField, Scenario};
use crate::evolve::{duhamel_residual, integrate_along_solution, Propagator, Scheme};
use crate::fourier;
use crate::grid::{self, discrete_gradient, Grid, SpaceField, SpaceTimeField};
use crate::linalg::{identity, max_singular_value, p_norm_estimate};
use crate::maxreg::{apply_ml, apply_ml_tilde, apply_rl, estimate_operator_norm, random_probes, AutonomousKit};
use crate::norms::{
    ball_average, exponent_label, hneg1_seminorm, slice_norm, space_time_l2, tent_norm, whitney_weights, xp_norm,
    NormConfig,
};
use crate::{Error, Result, DENSE_CELL_LIMIT};

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

fn report(id: &str) -> CheckReport {
    let info = lookup(id).expect("registered check");
    CheckReport::new(info.id, info.tolerance, info.policy)
}

fn skipped(id: &str, reason: impl Into<String>) -> CheckReport {
    let info = lookup(id).expect("registered check");
    CheckReport::skipped(info.id, info.tolerance, info.policy, reason)
}

fn grad_sq(grid: &Grid, u: &[Complex64]) -> f64 {
    let mut g = vec![ZERO; grid.dim() * grid.cells()];
    grid::gradient_into(grid, u, &mut g);
    grid::norm(grid, &g).powi(2)
}

/// `|a − b| / max(|a|, |b|)`, zero when both vanish.
pub fn relative_variation(a: f64, b: f64) -> f64 {
    let m = a.abs().max(b.abs());
    if m == 0.0 {
        0.0
    } else {
        (a - b).abs() / m
    }
}

fn require_mean_zero(u0: &SpaceField) -> Result<()> {
    let scale = u0.norm() / u0.grid().volume().sqrt();
    if u0.mean().norm() > 1e-10 * scale {
        return Err(Error::InvalidArgument(format!("datum must be mean-zero, mean is {}", u0.mean())));
    }
    Ok(())
}

/// Time after which `‖u(T)‖ ≤ 10⁻⁶‖u₀‖` for mean-zero data, from the decay
/// rate `λ·gap` of the energy identity.
pub fn decay_horizon(prop: &Propagator) -> f64 {
    let lambda = prop.field().ellipticity().lambda;
    1e6f64.ln() / (lambda * fourier::spectral_gap(prop.grid()))
}

pub fn check_contraction(prop: &Propagator, pairs: &[(f64, f64)]) -> Result<CheckReport> {
    let cells = prop.grid().cells();
    if cells > DENSE_CELL_LIMIT {
        return Ok(skipped(
            "contraction",
            format!("dense singular values need at most {DENSE_CELL_LIMIT} cells, grid has {cells}"),
        ));
    }
    let mut r = report("contraction");
    let mut worst: f64 = 0.0;
    for &(t, s) in pairs {
        worst = worst.max(max_singular_value(prop.dense(t, s)?.view()));
    }
    r.compare("sigma_max", worst, 1.0, "max over sampled (t,s) of σ_max(Γ(t,s)) ≤ 1");
    r.record("pairs", pairs.len() as f64);
    Ok(r)
}

/// `E` = ball of radius `ℓ/16` around the middle cell, `F` = every cell at
/// distance at least `ℓ/10` from `E`.
pub fn separated_sets(grid: &Grid) -> (Vec<usize>, Vec<usize>) {
    let l = grid.period();
    let e = grid.parabolic_ball(middle_cell(grid), l / 16.0);
    let f = (0..grid.cells()).filter(|&y| e.iter().all(|&x| grid.distance(x, y) >= l / 10.0)).collect();
    (e, f)
}

/// Wrapped distance between two cell sets.
pub fn set_distance(grid: &Grid, e: &[usize], f: &[usize]) -> f64 {
    e.iter().flat_map(|&x| f.iter().map(move |&y| grid.distance(x, y))).fold(f64::INFINITY, f64::min)
}

fn probe_block_norm(prop: &Propagator, e: &[usize], f: &[usize], t: f64, s: f64) -> Result<f64> {
    let grid = *prop.grid();
    let mut rng = rng(0, 11);
    let mut best: f64 = 0.0;
    for _ in 0..64 {
        let mut v = vec![ZERO; grid.cells()];
        for &y in f {
            v[y] = Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        }
        let out = prop.apply_values(t, s, &v)?;
        let num: f64 = e.iter().map(|&x| out[x].norm_sqr()).sum::<f64>().sqrt();
        let den: f64 = f.iter().map(|&y| v[y].norm_sqr()).sum::<f64>().sqrt();
        best = best.max(num / den);
    }
    Ok(best)
}

fn offdiagonal_entry(
    prop: &Propagator,
    e: &[usize],
    f: &[usize],
    t: f64,
    s: f64,
    key: &str,
    r: &mut CheckReport,
) -> Result<()> {
    let grid = *prop.grid();
    let tau = t - s;
    if !(tau > 0.0) {
        return Err(Error::InvalidTime(format!("need t > s, got t = {t}, s = {s}")));
    }
    if e.is_empty() || f.is_empty() || e.iter().any(|x| f.contains(x)) {
        return Err(Error::InvalidArgument("E and F must be nonempty and disjoint".into()));
    }
    if grid.period() < 8.0 * tau.sqrt() {
        return Err(Error::InvalidArgument(format!("period {} below 8√(t−s) = {}", grid.period(), 8.0 * tau.sqrt())));
    }
    let d = set_distance(&grid, e, f);
    let ratio = d * d / tau;
    if ratio > 30.0 {
        return Err(Error::InvalidArgument(format!("d²/(t−s) = {ratio} exceeds 30")));
    }
    let alpha = prop.field().ellipticity().alpha;
    let bound = (-alpha * ratio).exp();
    let measured = if grid.cells() <= DENSE_CELL_LIMIT {
        let m = prop.dense(t, s)?;
        max_singular_value(m.select(Axis(0), e).select(Axis(1), f).view())
    } else {
        r.set_tolerance(0.15, "randomized block estimate (64 probes) ≤ 1.15 × bound");
        probe_block_norm(prop, e, f, t, s)?
    };
    r.compare(
        key,
        measured,
        bound,
        format!("‖1_E Γ(t,s) 1_F‖ ≤ exp(−α d²/(t−s)) with α = λ/4Λ² = {alpha}, d²/(t−s) = {ratio}"),
    );
    r.record(format!("{key}/distance"), d);
    r.record(format!("{key}/tau"), tau);
    Ok(())
}

pub fn check_offdiagonal(prop: &Propagator, e: &[usize], f: &[usize], t: f64, s: f64) -> Result<CheckReport> {
    let mut r = report("offdiagonal");
    offdiagonal_entry(prop, e, f, t, s, "block", &mut r)?;
    Ok(r)
}

/// The off-diagonal bound on [`separated_sets`] at `t − s = d²/ratio`.
pub fn check_offdiagonal_ratios(prop: &Propagator, ratios: &[f64]) -> Result<CheckReport> {
    let grid = *prop.grid();
    let (e, f) = separated_sets(&grid);
    let d = set_distance(&grid, &e, &f);
    let mut r = report("offdiagonal");
    for &ratio in ratios {
        let tau = d * d / ratio;
        let key = format!("ratio={ratio}");
        if grid.period() < 8.0 * tau.sqrt() || ratio > 30.0 {
            r.note(format!("{key}: outside the admissible range (period ≥ 8√(t−s), d²/(t−s) ≤ 30)"));
            continue;
        }
        offdiagonal_entry(prop, &e, &f, tau, 0.0, &key, &mut r)?;
    }
    Ok(r)
}

pub fn check_conservation(prop: &Propagator, pairs: &[(f64, f64)]) -> Result<CheckReport> {
    let ones = vec![Complex64::new(1.0, 0.0); prop.grid().cells()];
    let dev = |v: Vec<Complex64>| v.iter().map(|z| (z - 1.0).norm()).fold(0.0, f64::max);
    let (mut fwd, mut adj): (f64, f64) = (0.0, 0.0);
    for &(t, s) in pairs {
        fwd = fwd.max(dev(prop.apply_values(t, s, &ones)?));
        adj = adj.max(dev(prop.adjoint_apply_values(t, s, &ones)?));
    }
    let mut r = report("conservation");
    r.record("forward", fwd);
    r.record("adjoint", adj);
    r.compare("deviation", fwd.max(adj), 1e-10, "max(|Γ(t,s)1 − 1|, |Γ(t,s)*1 − 1|) ≤ 1e-10");
    Ok(r)
}

pub fn check_norm_equivalence(prop: &Propagator, u0: &SpaceField) -> Result<CheckReport> {
    require_mean_zero(u0)?;
    let grid = *prop.grid();
    let el = prop.field().ellipticity();
    let (lambda, big) = (el.lambda, el.big_lambda);
    let norm0 = u0.norm();
    let t_end = decay_horizon(prop);
    let mut r = report("norm_equivalence");
    let (mut g_lo, mut g_hi, mut sup) = (0.0, 0.0, 0.0);
    if norm0 > 0.0 {
        let g = integrate_along_solution(prop, u0.values(), t_end, 1e-11 * norm0 * norm0, |_, u| grad_sq(&grid, u))?;
        let tail = prop.apply(t_end, 0.0, u0)?.norm();
        g_lo = g.value.max(0.0).sqrt();
        g_hi = (g.value.max(0.0) + tail * tail / (2.0 * lambda)).sqrt();
        sup = norm0;
        for t in [t_end / 64.0, t_end / 8.0, t_end] {
            sup = sup.max(prop.apply(t, 0.0, u0)?.norm());
        }
        r.record("tail_l2", tail);
        r.record("quadrature_change", g.error_estimate);
    }
    r.compare("sup_equals_initial", (sup - norm0).abs(), 1e-10 * norm0, "|‖u‖_{L^∞(L²)} − ‖u₀‖| ≤ 1e-10‖u₀‖");
    r.compare("lower", norm0, (2.0 * big).sqrt() * g_lo, "‖u₀‖ ≤ √(2Λ)‖∇u‖_{L²(0,T;L²)}");
    r.compare(
        "upper",
        (2.0 * big).sqrt() * g_hi,
        (big / lambda).sqrt() * norm0,
        "√(2Λ)(‖∇u‖²_{L²(0,T;L²)} + ‖u(T)‖²/2λ)^{1/2} ≤ √(Λ/λ)‖u₀‖",
    );
    r.record("horizon", t_end);
    r.record("grad_l2_l2", g_lo);
    r.record("lambda", lambda);
    r.record("Lambda", big);
    Ok(r)
}

pub fn check_energy_equality(prop: &Propagator, u0: &SpaceField, t_end: f64) -> Result<CheckReport> {
    let grid = *prop.grid();
    let norm0 = u0.norm();
    let mut r = report("energy");
    if prop.scheme() != Scheme::ExactExpm {
        r.note("scheme is not exact_expm: the residual includes time-discretisation error");
    }
    if norm0 == 0.0 {
        r.compare("residual", 0.0, 1e-7, "|‖u₀‖² − 2Re∫⟨A∇u,∇u⟩ − ‖u(T)‖²| / ‖u₀‖² ≤ 1e-7");
        return Ok(r);
    }
    let dissipation = integrate_along_solution(prop, u0.values(), t_end, 1e-10 * norm0 * norm0, |k, u| {
        grid::inner(&grid, &prop.operator(k).apply(u), u).re
    })?;
    let final_sq = prop.apply(t_end, 0.0, u0)?.norm().powi(2);
    let residual = (norm0 * norm0 - 2.0 * dissipation.value - final_sq).abs() / (norm0 * norm0);
    r.compare("residual", residual, 1e-7, "|‖u₀‖² − 2Re∫⟨A∇u,∇u⟩ − ‖u(T)‖²| / ‖u₀‖² ≤ 1e-7");
    r.record("initial_sq", norm0 * norm0);
    r.record("dissipation", 2.0 * dissipation.value);
    r.record("final_sq", final_sq);
    r.record("quadrature_change", dissipation.error_estimate / (norm0 * norm0));
    r.record("horizon", t_end);
    Ok(r)
}

fn slice_at(u: &SpaceTimeField, time: f64) -> Result<&SpaceField> {
    u.times()
        .iter()
        .position(|&x| (x - time).abs() <= 1e-12 * time.abs().max(1.0))
        .map(|i| &u.slices()[i])
        .ok_or_else(|| Error::InvalidArgument(format!("no sample at time {time}")))
}

/// Largest relative defect of `⟨u(s), Γ(t,s)*h⟩ = ⟨u(t), h⟩` over `hs`.
pub fn pairing_residual(prop: &Propagator, u: &SpaceTimeField, s: f64, t: f64, hs: &[SpaceField]) -> Result<f64> {
    let us = slice_at(u, s)?;
    let ut = slice_at(u, t)?;
    let mut worst: f64 = 0.0;
    for h in hs {
        let lhs = us.inner(&prop.adjoint_apply(t, s, h)?);
        let rhs = ut.inner(h);
        let scale = us.norm() * h.norm();
        if scale > 0.0 {
            worst = worst.max((lhs - rhs).norm() / scale);
        }
    }
    Ok(worst)
}

pub fn check_interior_representation(
    prop: &Propagator,
    u: &SpaceTimeField,
    s: f64,
    t: f64,
    hs: &[SpaceField],
) -> Result<CheckReport> {
    let mut r = report("interior_representation");
    let worst = pairing_residual(prop, u, s, t, hs)?;
    r.compare("pairing", worst, 1e-10, "|⟨u(s),Γ(t,s)*h⟩ − ⟨u(t),h⟩| / (‖u(s)‖‖h‖) ≤ 1e-10");
    r.record("probes", hs.len() as f64);
    Ok(r)
}

/// Trapezoid mean over the uniform lattice window `[c − w, c + w]`.
fn window_mean(v: &[Vec<f64>], center: usize, half: usize, x: usize) -> f64 {
    let lo = center - half;
    let hi = center + half;
    let inner: f64 = (lo + 1..hi).map(|i| v[i][x]).sum();
    (inner + 0.5 * (v[lo][x] + v[hi][x])) / (2 * half) as f64
}

/// `sup (⨏_{B(r)}|u|^q)^{1/q} / (⨏_{B(4r)}|u|²)^{1/2}` over parabolic balls
/// `[t − r², t + r²] × B(x, r)` with `r² = m·dt` for `m` in `radius_steps`,
/// centres at every cell and at lattice times `t ≥ 25r²` (so `r < √t/4`).
/// `u` must be sampled at `t_i = i·dt`. Returns the supremum and the number
/// of balls.
pub fn reverse_holder_sup(u: &SpaceTimeField, dt: f64, radius_steps: &[usize], q: f64) -> Result<(f64, usize)> {
    let grid = *u.grid();
    let times = u.times();
    if times.iter().enumerate().any(|(i, &t)| (t - i as f64 * dt).abs() > 1e-9 * dt.max(t)) {
        return Err(Error::InvalidArgument("reverse Hölder samples must lie on the lattice i·dt".into()));
    }
    let last = times.len() - 1;
    let abs2: Vec<Vec<f64>> = u.slices().iter().map(|s| s.pointwise_sq()).collect();
    let absq: Vec<Vec<f64>> = abs2.iter().map(|v| v.iter().map(|a| a.powf(0.5 * q)).collect()).collect();
    let (mut best, mut count): (f64, usize) = (0.0, 0);
    for &m in radius_steps {
        let r = (m as f64 * dt).sqrt();
        if 4.0 * r >= 0.5 * grid.period() {
            return Err(Error::InvalidArgument(format!("4r = {} does not fit in the torus", 4.0 * r)));
        }
        let small: Vec<Vec<f64>> = absq.iter().map(|v| ball_average(&grid, v, r)).collect();
        let big: Vec<Vec<f64>> = abs2.iter().map(|v| ball_average(&grid, v, 4.0 * r)).collect();
        let mut ic = 25 * m;
        while ic + 16 * m <= last {
            for x in 0..grid.cells() {
                let den = window_mean(&big, ic, 16 * m, x);
                if den > 0.0 {
                    let num = window_mean(&small, ic, m, x);
                    best = best.max(num.powf(1.0 / q) / den.sqrt());
                    count += 1;
                }
            }
            ic += m;
        }
    }
    if count == 0 {
        return Err(Error::InvalidArgument("no admissible parabolic ball in the sample".into()));
    }
    Ok((best, count))
}

const RH_STEPS: [usize; 2] = [4, 9];
const RH_SLICES: usize = 480;

/// Supremum of the reverse-Hölder ratio for `Γ(·,0)u₀` on the lattice
/// `dt = ℓ²/1024` with radii `ℓ/16` and `3ℓ/32`.
pub fn reverse_holder_for(prop: &Propagator, u0: &SpaceField) -> Result<(f64, usize)> {
    let grid = *prop.grid();
    let dt = grid.period().powi(2) / 1024.0;
    let times: Vec<f64> = (0..=RH_SLICES).map(|i| i as f64 * dt).collect();
    let u = solve_at(prop, u0, &times)?;
    reverse_holder_sup(&u, dt, &RH_STEPS, 2.0 + 4.0 / grid.dim() as f64)
}

pub fn check_reverse_holder(
    coarse: &Propagator,
    fine: &Propagator,
    datum: &dyn Fn(&Grid) -> SpaceField,
) -> Result<CheckReport> {
    let mut r = report("reverse_holder");
    let (rc, nc) = reverse_holder_for(coarse, &datum(coarse.grid()))?;
    let (rf, _) = reverse_holder_for(fine, &datum(fine.grid()))?;
    r.record(format!("ratio/n={}", coarse.grid().points_per_axis()), rc);
    r.record(format!("ratio/n={}", fine.grid().points_per_axis()), rf);
    r.record("exponent_q", 2.0 + 4.0 / coarse.grid().dim() as f64);
    r.record("balls_coarse", nc as f64);
    r.compare("refinement", relative_variation(rc, rf), 0.3, "|ρ_n − ρ_2n| / max(ρ_n, ρ_2n) ≤ 0.3");
    Ok(r)
}

/// Parameters of a local energy cylinder `(a, b) × B(x, r)` and the
/// intermediate time `c ∈ (a, b]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Cylinder {
    pub center: usize,
    pub radius: f64,
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

fn cutoff(grid: &Grid, center: usize, r: f64) -> Vec<Complex64> {
    let h = grid.spacing();
    (0..grid.cells())
        .map(|y| Complex64::new(((2.0 * r - h - grid.distance(center, y)) / (r - h)).clamp(0.0, 1.0), 0.0))
        .collect()
}

/// `κ = r·max|∇η|` for the piecewise-linear cutoff `η` that equals one on
/// `B(x, r)` and vanishes outside `B(x, 2r − h)`.
pub fn cutoff_constant(grid: &Grid, center: usize, r: f64) -> Result<f64> {
    if r <= 2.0 * grid.spacing() {
        return Err(Error::InvalidArgument(format!("radius {r} must exceed two cells")));
    }
    let eta = cutoff(grid, center, r);
    let mut g = vec![ZERO; grid.dim() * grid.cells()];
    grid::gradient_into(grid, &eta, &mut g);
    let n = grid.cells();
    let max = (0..n).map(|i| (0..grid.dim()).map(|a| g[a * n + i].norm_sqr()).sum::<f64>().sqrt()).fold(0.0, f64::max);
    Ok(r * max)
}

/// Composite Simpson on an even number of uniform panels, trapezoid otherwise.
fn uniform_integral(values: &[f64], dt: f64) -> f64 {
    let panels = values.len() - 1;
    if panels == 0 {
        return 0.0;
    }
    if panels % 2 == 1 {
        return dt * (values.iter().sum::<f64>() - 0.5 * (values[0] + values[panels]));
    }
    let inner: f64 = (1..panels).map(|i| if i % 2 == 1 { 4.0 } else { 2.0 } * values[i]).sum();
    dt / 3.0 * (values[0] + inner + values[panels])
}

pub fn check_local_energy(prop: &Propagator, u0: &SpaceField, cyl: &Cylinder) -> Result<CheckReport> {
    let Cylinder { center, radius: r, a, b, c } = *cyl;
    if !(0.0 <= a && a < c && c <= b) {
        return Err(Error::InvalidTime(format!("need 0 ≤ a < c ≤ b, got {a}, {c}, {b}")));
    }
    let grid = *prop.grid();
    if 4.0 * r >= grid.period() {
        return Err(Error::InvalidArgument(format!("ball B(x, 2r) with r = {r} wraps around the torus")));
    }
    let kappa = cutoff_constant(&grid, center, r)?;
    let el = prop.field().ellipticity();
    let (lambda, big) = (el.lambda, el.big_lambda);
    const STEPS: usize = 512;
    let dt = (b - a) / STEPS as f64;
    let jc = ((c - a) / dt).round() as usize;
    let inner_cells = grid.parabolic_ball(center, r);
    let outer_cells = grid.parabolic_ball(center, 2.0 * r);
    let vol = grid.cell_volume();
    let n = grid.cells();
    let mut outer_mass = Vec::with_capacity(STEPS + 1);
    let mut inner_grad = Vec::with_capacity(STEPS + 1);
    let mut u = prop.apply_values(a, 0.0, u0.values())?;
    let mut g = vec![ZERO; grid.dim() * n];
    for j in 0..=STEPS {
        if j > 0 {
            u = prop.apply_values(a + j as f64 * dt, a + (j - 1) as f64 * dt, &u)?;
        }
        outer_mass.push(outer_cells.iter().map(|&i| u[i].norm_sqr()).sum::<f64>() * vol);
        grid::gradient_into(&grid, &u, &mut g);
        inner_grad.push(
            inner_cells.iter().map(|&i| (0..grid.dim()).map(|k| g[k * n + i].norm_sqr()).sum::<f64>()).sum::<f64>()
                * vol,
        );
    }
    let end_mass = inner_cells.iter().map(|&i| u[i].norm_sqr()).sum::<f64>() * vol;
    let outer_int = uniform_integral(&outer_mass, dt);
    let grad_int = uniform_integral(&inner_grad[jc..], dt);
    let c_snap = a + jc as f64 * dt;
    let k2 = 4.0 * kappa * kappa * big * big / (lambda * r * r);
    let mut rep = report("local_energy");
    rep.compare(
        "endpoint",
        end_mass,
        (k2 + 1.0 / (b - a)) * outer_int,
        "‖u(b)‖²_{B(x,r)} ≤ (4κ²Λ²/λr² + 1/(b−a)) ∫_a^b ‖u‖²_{B(x,2r)}",
    );
    rep.compare(
        "gradient",
        grad_int,
        (1.0 + (b - a) * k2) * outer_int / (lambda * (c_snap - a)),
        "∫_c^b ‖∇u‖²_{B(x,r)} ≤ (1 + (b−a)4κ²Λ²/λr²) ∫_a^b ‖u‖²_{B(x,2r)} / λ(c−a)",
    );
    rep.record("kappa", kappa);
    rep.record("radius", r);
    rep.record("c", c_snap);
    Ok(rep)
}

/// `(p, ‖u‖_{X^p}, ‖∇u‖_{T^{p,2}})` for `u = Γ(·,0)u₀` sampled at
/// `T·2^{−j/4}`, `j = 0, …, 64`.
pub fn maximal_square_norms(
    prop: &Propagator,
    u0: &SpaceField,
    exponents: &[f64],
    base: &NormConfig,
) -> Result<Vec<(f64, f64, f64)>> {
    let octaves = (base.horizon / base.t_min).log2().ceil().clamp(1.0, 24.0) as u32;
    let mut times = vec![0.0];
    times.extend(geometric_times(base.horizon, octaves, 4));
    let u = solve_at(prop, u0, &times)?;
    let grad = u.gradient_field()?;
    exponents
        .iter()
        .map(|&p| {
            let cfg = base.with_p(p)?;
            Ok((p, xp_norm(&u, p, &cfg)?, tent_norm(&grad, p, &cfg)?))
        })
        .collect()
}

pub fn check_max_square(
    coarse: &Propagator,
    fine: &Propagator,
    datum: &dyn Fn(&Grid) -> SpaceField,
    exponents: &[f64],
    base: &NormConfig,
) -> Result<CheckReport> {
    let mut r = report("max_square");
    let nc = coarse.grid().points_per_axis();
    let nf = fine.grid().points_per_axis();
    let c = maximal_square_norms(coarse, &datum(coarse.grid()), exponents, base)?;
    let f = maximal_square_norms(fine, &datum(fine.grid()), exponents, base)?;
    for ((p, xc, tc), (_, xf, tf)) in c.into_iter().zip(f) {
        let label = exponent_label(p);
        let (rc, rf) = (xc / tc, xf / tf);
        r.record(format!("p={label}/xp_over_tent/n={nc}"), rc);
        r.record(format!("p={label}/xp_over_tent/n={nf}"), rf);
        r.record(format!("p={label}/tent_over_xp/n={nc}"), 1.0 / rc);
        r.record(format!("p={label}/tent_over_xp/n={nf}"), 1.0 / rf);
        r.compare(
            format!("p={label}/refinement"),
            relative_variation(rc, rf),
            0.3,
            "|ρ_n − ρ_2n| / max ≤ 0.3 for ρ = ‖u‖_{X^p}/‖∇u‖_{T^{p,2}} (and its reciprocal)",
        );
    }
    Ok(r)
}

pub fn check_struct_bound(prop: &Propagator, u0: &SpaceField) -> Result<CheckReport> {
    require_mean_zero(u0)?;
    let grid = *prop.grid();
    let el = prop.field().ellipticity();
    let (lambda, big) = (el.lambda, el.big_lambda);
    let norm0 = u0.norm();
    let mut r = report("struct_bound");
    let formula = "‖u‖_{L^∞(L²)} ≤ √(2‖u‖_{L²(0,T;Ḣ¹)}‖∂ₜu‖_{L²(0,T;Ḣ⁻¹)})";
    if norm0 == 0.0 {
        r.compare("inequality", 0.0, 0.0, formula);
        return Ok(r);
    }
    let t_end = decay_horizon(prop);
    let scale = norm0 * norm0;
    let i1 = integrate_along_solution(prop, u0.values(), t_end, 1e-11 * scale, |_, u| grad_sq(&grid, u))?;
    let i2 = integrate_along_solution(prop, u0.values(), t_end, 1e-11 * scale * big.max(1.0).powi(2), |k, u| {
        let lu = SpaceField::scalar(grid, prop.operator(k).apply(u)).expect("scalar field");
        hneg1_seminorm(&lu).expect("scalar field").value.powi(2)
    })?;
    let tail = prop.apply(t_end, 0.0, u0)?.norm();
    let lhs = norm0.max(tail);
    let rhs = (2.0 * i1.value.max(0.0).sqrt() * i2.value.max(0.0).sqrt()).sqrt();
    r.compare("inequality", lhs, rhs, formula);
    let t1 = tail * tail / (2.0 * lambda);
    let extended = (2.0 * (i1.value + t1).sqrt() * (i2.value + big * big * t1).sqrt()).sqrt();
    r.record("rhs_with_tail_bound", extended);
    r.record("grad_l2_l2", i1.value.sqrt());
    r.record("dt_l2_hneg1", i2.value.sqrt());
    r.record("horizon", t_end);
    Ok(r)
}

/// Root-mean-square over `cells` of the Whitney averages
/// `⨏_{δ/2}^δ ⨏_{B(x,√δ)} |u(t,y) − f(x)|² dy dt`, square-rooted, per `δ`.
pub fn whitney_errors(u: &SpaceTimeField, f: &SpaceField, cells: &[usize], deltas: &[f64]) -> Result<Vec<f64>> {
    let grid = *u.grid();
    deltas
        .iter()
        .map(|&delta| {
            let weights = whitney_weights(u.times(), delta)?;
            let offsets = grid.ball_offsets(delta.sqrt());
            let total: f64 = cells
                .iter()
                .map(|&x| {
                    let fx = f.values()[x];
                    weights
                        .iter()
                        .map(|&(i, w)| {
                            let s = u.slices()[i].values();
                            w * offsets.iter().map(|&o| (s[grid.translate(x, o)] - fx).norm_sqr()).sum::<f64>()
                                / offsets.len() as f64
                        })
                        .sum::<f64>()
                })
                .sum();
            Ok((total / cells.len() as f64).sqrt())
        })
        .collect()
}

/// Whitney-average convergence for data with jumps across the hyperplanes
/// `x₀ = jump`, along `δ = ℓ²/1024 · 2^{−j}`, `j = 0, …, 8`, at the cells
/// farther than `4√δ₀` from every jump.
pub fn check_whitney_fatou(prop: &Propagator, u0: &SpaceField, jumps: &[f64]) -> Result<CheckReport> {
    let grid = *prop.grid();
    let l = grid.period();
    let delta0 = l * l / 1024.0;
    let deltas: Vec<f64> = (0..=8).map(|j| delta0 * 0.5f64.powi(j)).collect();
    let times = geometric_times(delta0, 9, 4);
    let u = solve_at(prop, u0, &times)?;
    let gap = |i: usize, jump: f64| grid.wrap(grid.center(i)[0] - jump).abs();
    let far: Vec<usize> =
        (0..grid.cells()).filter(|&i| jumps.iter().all(|&j| gap(i, j) > 4.0 * delta0.sqrt())).collect();
    if far.is_empty() {
        return Err(Error::InvalidArgument("no cell lies farther than 4√δ from the jumps".into()));
    }
    let errs = whitney_errors(&u, u0, &far, &deltas)?;
    let sup = u0.values().iter().map(|z| z.norm()).fold(0.0, f64::max);
    let floor = 1e-14 * sup;
    let mut r = report("whitney_fatou");
    for (j, e) in errs.iter().enumerate() {
        r.record(format!("error/{j:02}"), *e);
    }
    for j in 1..errs.len() {
        r.compare(
            format!("monotone/{j:02}"),
            errs[j],
            1.1 * errs[j - 1] + floor,
            "E(δ_j) ≤ 1.1·E(δ_{j−1}) + 1e-14‖u₀‖_∞",
        );
    }
    r.compare("final", *errs.last().unwrap(), 1e-3 * sup, "E(δ_min) ≤ 1e-3‖u₀‖_∞");
    let ends = [deltas[0], *deltas.last().unwrap()];
    for (k, &jump) in jumps.iter().enumerate() {
        let mut near: Vec<usize> = (0..grid.cells()).collect();
        near.sort_by(|&a, &b| gap(a, jump).total_cmp(&gap(b, jump)));
        let e = whitney_errors(&u, u0, &near[..2], &ends)?;
        r.record(format!("jump_cells_error/{k}/first"), e[0]);
        r.record(format!("jump_cells_error/{k}/last"), e[1]);
    }
    r.note("errors at the cells nearest each jump are recorded; they are not expected to vanish");
    r.record("cells", far.len() as f64);
    Ok(r)
}

/// Parameters of the staircase family used for the BV uniformity check.
#[derive(Clone, Debug, PartialEq)]
pub struct BvFamily {
    pub imag: f64,
    pub blocks: usize,
    pub jump_counts: Vec<usize>,
    pub budget: f64,
    pub budgets: Vec<f64>,
}

impl Default for BvFamily {
    fn default() -> Self {
        Self { imag: 4.0, blocks: 8, jump_counts: vec![1, 2, 4, 8, 16], budget: 0.5, budgets: vec![0.25, 0.5, 1.0] }
    }
}

/// `K` equal jumps of total size `budget`, so the BV seminorm equals `budget`.
pub fn bv_family_field(
    grid: Grid,
    horizon: f64,
    jumps: usize,
    budget: f64,
    family: &BvFamily,
) -> Result<CoefficientField> {
    let scenario =
        Scenario::BvStaircase { jumps: vec![budget / jumps as f64; jumps], imag: family.imag, blocks: family.blocks };
    make_scenario(&scenario, grid, horizon, 0)
}

/// `max_t ‖Γ(t,0)‖_{ℓᵖ→ℓᵖ}` over `t ∈ {T·j/samples} ∪ {T·2⁻ʲ} ∪ breakpoints`.
pub fn sup_lp_norm(prop: &Propagator, p: f64, samples: usize) -> Result<f64> {
    let horizon = prop.field().horizon();
    let mut times: Vec<f64> = (1..=samples).map(|j| horizon * j as f64 / samples as f64).collect();
    let h2 = prop.grid().spacing().powi(2);
    times.extend((0..24).map(|j| horizon * 0.5f64.powi(j)).filter(|&t| t >= 1e-3 * h2));
    times.extend(prop.field().breakpoints().iter().copied().filter(|&b| b > 0.0 && b < horizon));
    times.sort_by(f64::total_cmp);
    times.dedup_by(|a, b| (*a - *b).abs() <= 1e-14 * horizon);
    let mut acc = identity(prop.grid().cells());
    let mut prev = 0.0;
    let mut best: f64 = 1.0;
    for t in times {
        acc = prop.dense(t, prev)?.dot(&acc);
        best = best.max(p_norm_estimate(&acc, p));
        prev = t;
    }
    Ok(best)
}

pub fn check_bv_uniformity(grid: Grid, scheme: Scheme, horizon: f64, p: f64, family: &BvFamily) -> Result<CheckReport> {
    if !(p > 1.0 && p < 2.0) {
        return Err(Error::InvalidArgument(format!("exponent {p} must lie in (1, 2)")));
    }
    if grid.cells() > DENSE_CELL_LIMIT / 4 {
        return Ok(skipped("bv_uniformity", format!("dense ℓᵖ norms limited to {} cells", DENSE_CELL_LIMIT / 4)));
    }
    let estimate = |k: usize, budget: f64| -> Result<f64> {
        sup_lp_norm(&Propagator::build(bv_family_field(grid, horizon, k, budget, family)?, scheme)?, p, 32)
    };
    let mut r = report("bv_uniformity");
    let ests = family.jump_counts.iter().map(|&k| estimate(k, family.budget)).collect::<Result<Vec<_>>>()?;
    let min = ests.iter().copied().fold(f64::INFINITY, f64::min);
    for (&k, &e) in family.jump_counts.iter().zip(&ests) {
        r.compare(
            format!("K={k:02}"),
            e,
            1.1 * min,
            format!("sup_t‖Γ(t,0)‖_{{ℓᵖ→ℓᵖ}} ≤ 1.1 × min over jump counts, BV budget {}, p = {p}", family.budget),
        );
    }
    let k_ref = family.jump_counts.iter().copied().max().unwrap_or(1);
    let base = estimate(1, 0.0)?;
    r.record("budget=0", base);
    let mut rates = Vec::new();
    for &b in &family.budgets {
        let e = estimate(k_ref, b)?;
        let rate = (e / base).ln() / b;
        r.record(format!("budget={b}"), e);
        r.record(format!("rate/budget={b}"), rate);
        rates.push(rate);
    }
    if let Some((&last, rest)) = rates.split_last() {
        if !rest.is_empty() {
            let reference = rest.iter().copied().fold(0.0, f64::max);
            r.compare(
                "budget_growth",
                last.max(0.0),
                1.1 * reference,
                "ln(N(b_max)/N(0))/b_max ≤ 1.1 × max_{b < b_max} ln(N(b)/N(0))/b",
            );
        }
    }
    r.record("p", p);
    Ok(r)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GaussianFit {
    /// `C(0) = max |k|(t−s)^{n/2}`.
    pub c0: f64,
    pub constant: f64,
    pub rate: f64,
    pub samples: usize,
}

/// Smallest Gaussian envelope `C(t−s)^{−n/2}e^{−c|x−y|²/4(t−s)}` over kernel
/// columns from three sources at `t − s ∈ {ℓ²/800, ℓ²/400, ℓ²/200}`, restricted
/// to `|x−y|²/(t−s) ≤ 30`: `c` is the largest rate with `C(c) ≤ 1.05·C(0)`.
pub fn fit_gaussian(prop: &Propagator) -> Result<GaussianFit> {
    let grid = *prop.grid();
    let l = grid.period();
    let dim = grid.dim() as i32;
    let n = grid.points_per_axis();
    let q = n / 4;
    let sources = [0, grid.index([q, if dim == 2 { q } else { 0 }]), middle_cell(&grid)];
    let mut pts: Vec<(f64, f64)> = Vec::new();
    for tau in [l * l / 800.0, l * l / 400.0, l * l / 200.0] {
        for &y in &sources {
            let k = prop.kernel_column(tau, 0.0, y)?;
            for (x, v) in k.values().iter().enumerate() {
                let d2 = grid.distance(x, y).powi(2);
                if d2 / tau <= 30.0 {
                    pts.push((v.norm() * tau.powf(0.5 * dim as f64), d2 / (4.0 * tau)));
                }
            }
        }
    }
    let envelope = |c: f64| pts.iter().map(|(a, z)| a * (c * z).exp()).fold(0.0, f64::max);
    let c0 = envelope(0.0);
    let (mut lo, mut hi) = (0.0, 8.0);
    if envelope(hi) <= 1.05 * c0 {
        lo = hi;
    } else {
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if envelope(mid) <= 1.05 * c0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
    }
    Ok(GaussianFit { c0, constant: envelope(lo), rate: lo, samples: pts.len() })
}

pub fn check_kernel_gaussian(coarse: &Propagator, fine: &Propagator) -> Result<CheckReport> {
    if !coarse.field().is_real() || !fine.field().is_real() {
        return Ok(skipped(
            "kernel_gaussian",
            "complex coefficients: Gaussian kernel bounds are only asserted for real coefficients",
        ));
    }
    let fc = fit_gaussian(coarse)?;
    let ff = fit_gaussian(fine)?;
    let mut r = report("kernel_gaussian");
    for (fit, n) in [(fc, coarse.grid().points_per_axis()), (ff, fine.grid().points_per_axis())] {
        r.record(format!("C0/n={n}"), fit.c0);
        r.record(format!("C/n={n}"), fit.constant);
        r.record(format!("c/n={n}"), fit.rate);
    }
    r.compare("constant_refinement", relative_variation(fc.constant, ff.constant), 0.3, "|C_n − C_2n| / max ≤ 0.3");
    r.compare("rate_refinement", relative_variation(fc.rate, ff.rate), 0.3, "|c_n − c_2n| / max ≤ 0.3");
    r.compare("rate_positive", 1e-3 / fc.rate.min(ff.rate), 1.0, "c ≥ 1e-3");
    Ok(r)
}

pub fn check_duhamel(prop: &Propagator, reference: &CoefficientField, h: &SpaceField, t: f64) -> Result<CheckReport> {
    let d = duhamel_residual(prop, reference, h, t)?;
    let mut r = report("duhamel");
    r.compare("residual", d.residual, 1e-7, "‖Γ(t,0)h − e^{−tL̲}h − ∫₀ᵗ e^{−(t−s)L̲}(L̲ − L(s))Γ(s,0)h ds‖ / ‖h‖ ≤ 1e-7");
    r.record("quadrature_change", d.quadrature_change);
    r.record("level", d.level as f64);
    r.record("t", t);
    Ok(r)
}

/// Probes built from the Fourier modes `|k_j| ≤ 3` with seeded coefficients
/// damped by `1/(1+|k|²)`, independent of the grid resolution.
pub fn physical_probes(
    grid: Grid,
    times: &[f64],
    arity: usize,
    count: usize,
    seed: u64,
) -> Result<Vec<SpaceTimeField>> {
    let mut rng = rng(seed, 13);
    let range: Vec<i64> = (-3..=3).collect();
    let modes: Vec<[i64; 2]> = if grid.dim() == 1 {
        range.iter().map(|&k| [k, 0]).collect()
    } else {
        range.iter().flat_map(|&a| range.iter().map(move |&b| [a, b])).collect()
    };
    let n = grid.points_per_axis() as i64;
    let wrap = |k: i64| k.rem_euclid(n) as usize;
    (0..count)
        .map(|_| {
            let slices = times
                .iter()
                .map(|_| {
                    let mut v = Vec::with_capacity(arity * grid.cells());
                    for _ in 0..arity {
                        let mut comp = vec![ZERO; grid.cells()];
                        for k in &modes {
                            let damp = 1.0 / (1.0 + (k[0] * k[0] + k[1] * k[1]) as f64);
                            let c = Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)) * damp;
                            let m = fourier::mode(&grid, [wrap(k[0]), wrap(k[1])]);
                            comp.iter_mut().zip(m).for_each(|(a, b)| *a += c * b);
                        }
                        v.extend(comp);
                    }
                    SpaceField::new(grid, arity, v)
                })
                .collect::<Result<Vec<_>>>()?;
            SpaceTimeField::new(grid, times.to_vec(), slices, None)
        })
        .collect()
}

fn stf_difference(a: &SpaceTimeField, b: &SpaceTimeField) -> Result<SpaceTimeField> {
    let slices = a
        .slices()
        .iter()
        .zip(b.slices())
        .map(|(x, y)| {
            SpaceField::new(*x.grid(), x.arity(), x.values().iter().zip(y.values()).map(|(p, q)| p - q).collect())
        })
        .collect::<Result<Vec<_>>>()?;
    SpaceTimeField::new(*a.grid(), a.times().to_vec(), slices, None)
}

/// Largest `‖∇R_L f − M̃_L f‖_{L²(L²)} / ‖f‖_{L²(L²)}` over the probes.
pub fn gradient_identity_residual(kit: &AutonomousKit, probes: &[SpaceTimeField]) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for f in probes {
        let r = apply_rl(kit, f)?;
        let grad_r = SpaceTimeField::new(
            *r.grid(),
            r.times().to_vec(),
            r.slices().iter().map(discrete_gradient).collect::<Result<Vec<_>>>()?,
            None,
        )?;
        let mt = apply_ml_tilde(kit, f)?;
        let scale = space_time_l2(f);
        if scale > 0.0 {
            worst = worst.max(space_time_l2(&stf_difference(&grad_r, &mt)?) / scale);
        }
    }
    Ok(worst)
}

/// `L²(L²)` norm estimate of `M_L` from 16 grid-independent probes on
/// `T·j/32`, `j = 1, …, 32`.
pub fn ml_norm_estimate(kit: &AutonomousKit, horizon: f64, seed: u64) -> Result<f64> {
    let grid = *kit.operator().grid();
    let times: Vec<f64> = (1..=32).map(|j| horizon * j as f64 / 32.0).collect();
    let probes = physical_probes(grid, &times, 1, 16, seed)?;
    estimate_operator_norm(|f| apply_ml(kit, f), |f| Ok(space_time_l2(f)), |f| Ok(space_time_l2(f)), &probes)
}

pub fn check_maxreg(coarse: &CoefficientField, fine: &CoefficientField, seed: u64) -> Result<CheckReport> {
    let kc = AutonomousKit::new(coarse)?;
    let kf = AutonomousKit::new(fine)?;
    let grid = *coarse.grid();
    let horizon = coarse.horizon();
    let times: Vec<f64> = (1..=32).map(|j| horizon * j as f64 / 32.0).collect();
    let probes = random_probes(grid, &times, grid.dim(), 20, seed)?;
    let mut r = report("maxreg");
    r.compare(
        "gradient_identity",
        gradient_identity_residual(&kc, &probes)?,
        1e-9,
        "‖∇R_L f − M̃_L f‖_{L²(L²)} / ‖f‖_{L²(L²)} ≤ 1e-9 on 20 probes",
    );
    let ec = ml_norm_estimate(&kc, horizon, seed)?;
    let ef = ml_norm_estimate(&kf, fine.horizon(), seed)?;
    r.record(format!("ml_norm/n={}", grid.points_per_axis()), ec);
    r.record(format!("ml_norm/n={}", fine.grid().points_per_axis()), ef);
    r.compare("ml_refinement", relative_variation(ec, ef), 0.25, "|N_n − N_2n| / max ≤ 0.25 for N ≈ ‖M_L‖_{L²(L²)}");
    Ok(r)
}

pub fn check_norm_identities(grid: Grid, fields: usize, seed: u64) -> Result<CheckReport> {
    let l = grid.period();
    let horizon = l * l / 4.0;
    let times = geometric_times(horizon, 4, 1);
    let cfg = NormConfig::new(times[0], horizon, vec![horizon], 2.0)?;
    let mut rng = rng(seed, 5);
    let (mut tent, mut slice): (f64, f64) = (0.0, 0.0);
    for _ in 0..fields {
        let slices: Vec<SpaceField> = times.iter().map(|_| random_field(&grid, &mut rng)).collect();
        let f = SpaceTimeField::new(grid, times.clone(), slices, None)?;
        let b = space_time_l2(&f);
        tent = tent.max((tent_norm(&f, 2.0, &cfg)? - b).abs() / b);
        let g = random_field(&grid, &mut rng);
        for delta in [l * l / 64.0, l * l / 16.0] {
            slice = slice.max((slice_norm(&g, 2.0, delta)? - g.norm()).abs() / g.norm());
        }
    }
    let mut r = report("norm_identities");
    r.compare("tent", tent, 1e-12, "|‖F‖_{T^{2,2}} − ‖F‖_{L²(L²)}| / ‖F‖_{L²(L²)} ≤ 1e-12");
    r.compare("slice", slice, 1e-12, "|‖g‖_{E²_δ} − ‖g‖_{L²}| / ‖g‖_{L²} ≤ 1e-12");
    r.record("fields", fields as f64);
    Ok(r)
}
