//! Norms and functionals on sampled space-time fields: Bochner norms, tent
//! spaces `T^{p,2}`, the Kenig–Pipher maximal function and `X^p`, slice
//! spaces `E^p_δ`, the Carleson functional, and the `Ḣ⁻¹` seminorm.
//!
//! Ball averages divide by the exact number of cells in the ball, so every
//! cell lies in equally many balls of a given radius and the Fubini
//! identities `T^{2,2} = L²(L²)` and `E²_δ = L²` hold to round-off.
//! Time integrals integrate the piecewise-linear interpolant of the samples.

use std::collections::BTreeMap;

use num_complex::Complex64;
use serde::Serialize;

use crate::fourier;
use crate::grid::{Grid, SpaceField, SpaceTimeField};
use crate::quad::trapezoid_weights;
use crate::{Error, Result};

/// Truncation and scale sampling shared by the space-time norms.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NormConfig {
    pub t_min: f64,
    pub horizon: f64,
    /// Scales `δ` for the Kenig–Pipher supremum and the Carleson radii `√δ`.
    pub delta_grid: Vec<f64>,
    /// Exponent in `[1, ∞]`.
    pub p: f64,
}

impl NormConfig {
    pub fn new(t_min: f64, horizon: f64, delta_grid: Vec<f64>, p: f64) -> Result<Self> {
        if !(t_min > 0.0 && t_min < horizon && horizon.is_finite()) {
            return Err(Error::InvalidParameters(format!("need 0 < t_min < T, got {t_min}, {horizon}")));
        }
        if delta_grid.is_empty() || delta_grid.iter().any(|&d| !(d > t_min && d <= horizon)) {
            return Err(Error::InvalidParameters("delta grid must be a nonempty subset of (t_min, T]".into()));
        }
        if !(p >= 1.0) {
            return Err(Error::InvalidParameters(format!("exponent p = {p} below 1")));
        }
        Ok(Self { t_min, horizon, delta_grid, p })
    }

    /// `t_min = T·2^{-16}` and `δ ∈ {T·2^{-j} : 0 ≤ j ≤ levels}`.
    pub fn dyadic(horizon: f64, levels: u32, p: f64) -> Result<Self> {
        let t_min = horizon * 0.5f64.powi(16);
        let deltas = (0..=levels.min(15)).map(|j| horizon * 0.5f64.powi(j as i32)).collect();
        Self::new(t_min, horizon, deltas, p)
    }

    pub fn with_p(&self, p: f64) -> Result<Self> {
        Self::new(self.t_min, self.horizon, self.delta_grid.clone(), p)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct NormReport {
    pub values: BTreeMap<String, f64>,
    pub provenance: String,
}

impl NormReport {
    pub fn get(&self, key: &str) -> Option<f64> {
        self.values.get(key).copied()
    }
}

/// Label used in report keys for an exponent.
pub fn exponent_label(p: f64) -> String {
    if p.is_infinite() {
        "inf".into()
    } else {
        format!("{p}")
    }
}

fn lp_of_values(grid: &Grid, abs: impl Iterator<Item = f64>, p: f64) -> f64 {
    if p.is_infinite() {
        abs.fold(0.0, f64::max)
    } else {
        (grid.cell_volume() * abs.map(|v| v.powf(p)).sum::<f64>()).powf(1.0 / p)
    }
}

/// `(h^d Σ|f|^p)^{1/p}`, the maximum for `p = ∞`. Vector fields use the
/// pointwise Euclidean norm.
pub fn lebesgue_norm(f: &SpaceField, p: f64) -> f64 {
    lp_of_values(f.grid(), f.pointwise_sq().into_iter().map(f64::sqrt), p)
}

/// `x ↦ ⨏_{B(x,r)} v`, averaging over exact cell counts.
pub fn ball_average(grid: &Grid, v: &[f64], radius: f64) -> Vec<f64> {
    let offsets = grid.ball_offsets(radius);
    let inv = 1.0 / offsets.len() as f64;
    (0..grid.cells()).map(|x| offsets.iter().map(|&o| v[grid.translate(x, o)]).sum::<f64>() * inv).collect()
}

/// `∫_a^b` of the piecewise-linear interpolant through `(times, values)`,
/// restricted to the sampled range.
fn interpolated_integral(times: &[f64], values: &[f64], a: f64, b: f64) -> f64 {
    let mut total = 0.0;
    for i in 0..times.len().saturating_sub(1) {
        let (t0, t1) = (times[i], times[i + 1]);
        let lo = a.max(t0);
        let hi = b.min(t1);
        if hi <= lo {
            continue;
        }
        let slope = (values[i + 1] - values[i]) / (t1 - t0);
        let at = |t: f64| values[i] + slope * (t - t0);
        total += 0.5 * (hi - lo) * (at(lo) + at(hi));
    }
    total
}

/// `L^∞(L²)`, `∫‖∇u‖²dt` with its square root, and `L^∞(L^p)` for each
/// requested `p`.
pub fn bochner_norms(u: &SpaceTimeField, ps: &[f64], with_gradient: bool) -> Result<NormReport> {
    if u.times().len() < 2 {
        return Err(Error::Shape("Bochner norms need at least two time slices".into()));
    }
    let mut values = BTreeMap::new();
    let linf_l2 = u.slices().iter().map(|s| s.norm()).fold(0.0, f64::max);
    values.insert("linf_l2".into(), linf_l2);
    for &p in ps {
        let v = u.slices().iter().map(|s| lebesgue_norm(s, p)).fold(0.0, f64::max);
        values.insert(format!("linf_l{}", exponent_label(p)), v);
    }
    if with_gradient {
        let grads =
            u.gradient_slices().ok_or_else(|| Error::Shape("gradient norm requested but no gradient slices".into()))?;
        let w = trapezoid_weights(u.times());
        let integral: f64 = grads.iter().zip(&w).map(|(g, w)| w * g.norm().powi(2)).sum();
        values.insert("grad_sq_integral".into(), integral);
        values.insert("grad_l2_l2".into(), integral.sqrt());
    }
    Ok(NormReport {
        values,
        provenance: format!(
            "{} slices on [{}, {}], arity {}",
            u.times().len(),
            u.times()[0],
            u.times()[u.times().len() - 1],
            u.arity()
        ),
    })
}

/// `(∫‖F(t)‖² dt)^{1/2}` over the sampled range, trapezoid in time.
pub fn space_time_l2(f: &SpaceTimeField) -> f64 {
    let w = trapezoid_weights(f.times());
    f.slices().iter().zip(&w).map(|(s, w)| w * s.norm().powi(2)).sum::<f64>().sqrt()
}

/// Per-cell square function `(∫_{t_min}^T ⨏_{B(x,√t)} |F|² dt)^{1/2}`.
pub fn tent_square_function(f: &SpaceTimeField, cfg: &NormConfig) -> Vec<f64> {
    let grid = *f.grid();
    let mut times = Vec::new();
    let mut averages: Vec<Vec<f64>> = Vec::new();
    for (t, s) in f.times().iter().zip(f.slices()) {
        if *t > 0.0 {
            times.push(*t);
            averages.push(ball_average(&grid, &s.pointwise_sq(), t.sqrt()));
        }
    }
    (0..grid.cells())
        .map(|x| {
            let q: Vec<f64> = averages.iter().map(|a| a[x]).collect();
            interpolated_integral(&times, &q, cfg.t_min, cfg.horizon).max(0.0).sqrt()
        })
        .collect()
}

/// `‖F‖_{T^{p,2}}`. For `p = ∞` this is the ball supremum
/// `sup_B (∫_{t_min}^{r_B²} ⨏_B |F|²)^{1/2}` over grid-centred balls with
/// radii `√t_j`, `t_j` the sample times in `(t_min, T]`.
pub fn tent_norm(f: &SpaceTimeField, p: f64, cfg: &NormConfig) -> Result<f64> {
    if !(p >= 1.0) {
        return Err(Error::InvalidParameters(format!("exponent p = {p} below 1")));
    }
    let grid = *f.grid();
    if p.is_finite() {
        return Ok(lp_of_values(&grid, tent_square_function(f, cfg).into_iter(), p));
    }
    let times: Vec<f64> = f.times().to_vec();
    let sq: Vec<Vec<f64>> = f.slices().iter().map(|s| s.pointwise_sq()).collect();
    let mut best: f64 = 0.0;
    for &r2 in times.iter().filter(|&&t| t > cfg.t_min && t <= cfg.horizon) {
        let upper = r2.min(cfg.horizon);
        let avgs: Vec<Vec<f64>> = sq.iter().map(|v| ball_average(&grid, v, r2.sqrt())).collect();
        for x in 0..grid.cells() {
            let q: Vec<f64> = avgs.iter().map(|a| a[x]).collect();
            best = best.max(interpolated_integral(&times, &q, cfg.t_min, upper));
        }
    }
    Ok(best.sqrt())
}

/// Normalised trapezoid weights of the samples inside the Whitney window
/// `(δ/2, δ]`; one sample gets weight one.
pub(crate) fn whitney_weights(times: &[f64], delta: f64) -> Result<Vec<(usize, f64)>> {
    let idx: Vec<usize> = (0..times.len()).filter(|&i| times[i] > 0.5 * delta && times[i] <= delta).collect();
    match idx.len() {
        0 => Err(Error::InvalidParameters(format!("no time slice inside the Whitney window (δ/2, δ], δ = {delta}"))),
        1 => Ok(vec![(idx[0], 1.0)]),
        _ => {
            let t: Vec<f64> = idx.iter().map(|&i| times[i]).collect();
            let span = t[t.len() - 1] - t[0];
            Ok(idx.into_iter().zip(trapezoid_weights(&t)).map(|(i, w)| (i, w / span)).collect())
        }
    }
}

/// `Ñ(F)(x) = max_δ (⨏_{δ/2}^δ ⨏_{B(x,√δ)} |F|²)^{1/2}` over the δ-grid,
/// returned as a real-valued scalar field.
pub fn kp_maximal(f: &SpaceTimeField, cfg: &NormConfig) -> Result<SpaceField> {
    let grid = *f.grid();
    let mut best = vec![0.0f64; grid.cells()];
    for &delta in &cfg.delta_grid {
        let weights = whitney_weights(f.times(), delta)?;
        let mut window = vec![0.0; grid.cells()];
        for (i, w) in weights {
            for (acc, v) in window.iter_mut().zip(f.slices()[i].pointwise_sq()) {
                *acc += w * v;
            }
        }
        for (b, v) in best.iter_mut().zip(ball_average(&grid, &window, delta.sqrt())) {
            *b = b.max(v);
        }
    }
    SpaceField::scalar(grid, best.into_iter().map(|v| Complex64::new(v.sqrt(), 0.0)).collect())
}

/// `‖F‖_{X^p} = ‖Ñ(F)‖_p`.
pub fn xp_norm(f: &SpaceTimeField, p: f64, cfg: &NormConfig) -> Result<f64> {
    Ok(lebesgue_norm(&kp_maximal(f, cfg)?, p))
}

/// `‖g‖_{E^p_δ} = (∫(⨏_{B(x,√δ)}|g|²)^{p/2} dx)^{1/p}`.
pub fn slice_norm(g: &SpaceField, p: f64, delta: f64) -> Result<f64> {
    if !(delta > 0.0) || !(p >= 1.0) {
        return Err(Error::InvalidParameters(format!("need δ > 0 and p ≥ 1, got {delta}, {p}")));
    }
    let grid = *g.grid();
    let avg = ball_average(&grid, &g.pointwise_sq(), delta.sqrt());
    Ok(lp_of_values(&grid, avg.into_iter().map(f64::sqrt), p))
}

/// `C(F)(y) = sup_{B ∋ y} (⨏_B ∫_{t_min}^{min(r_B², T)} |F|² dt)^{1/2}` over
/// grid-centred balls with radii `√δ`, `δ` in the δ-grid.
pub fn carleson_functional(f: &SpaceTimeField, cfg: &NormConfig) -> Result<SpaceField> {
    let grid = *f.grid();
    let times = f.times();
    let sq: Vec<Vec<f64>> = f.slices().iter().map(|s| s.pointwise_sq()).collect();
    let mut best = vec![0.0f64; grid.cells()];
    for &delta in &cfg.delta_grid {
        let upper = delta.min(cfg.horizon);
        // Per-cell energy ∫_{t_min}^{r²}|F|² dt, then its ball average per centre.
        let energy: Vec<f64> = (0..grid.cells())
            .map(|x| {
                let q: Vec<f64> = sq.iter().map(|v| v[x]).collect();
                interpolated_integral(times, &q, cfg.t_min, upper)
            })
            .collect();
        let radius = delta.sqrt();
        let per_center = ball_average(&grid, &energy, radius);
        // Balls are symmetric: y ∈ B(c, r) iff c ∈ B(y, r).
        let offsets = grid.ball_offsets(radius);
        for (y, b) in best.iter_mut().enumerate() {
            for &o in &offsets {
                *b = b.max(per_center[grid.translate(y, o)]);
            }
        }
    }
    SpaceField::scalar(grid, best.into_iter().map(|v| Complex64::new(v.max(0.0).sqrt(), 0.0)).collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Hneg1 {
    pub value: f64,
    /// Mean removed before inverting the gradient symbol.
    pub removed_mean: Complex64,
}

/// `‖f‖_{Ḣ⁻¹} = (Σ_{k≠0} |f̂(k)|²/|σ(k)|²)^{1/2}` with `σ` the symbol of the
/// discrete gradient, normalised like the `L²` norm. The mean is projected
/// out and reported.
pub fn hneg1_seminorm(f: &SpaceField) -> Result<Hneg1> {
    if !f.is_scalar() {
        return Err(Error::Shape("Ḣ⁻¹ seminorm expects a scalar field".into()));
    }
    let grid = *f.grid();
    let spec = fourier::forward(&grid, f.values());
    let n = grid.cells() as f64;
    let sum: f64 =
        spec.iter().enumerate().skip(1).map(|(k, c)| c.norm_sqr() / fourier::laplacian_symbol(&grid, k)).sum();
    Ok(Hneg1 { value: (grid.cell_volume() * sum / n).sqrt(), removed_mean: spec[0] / n })
}
