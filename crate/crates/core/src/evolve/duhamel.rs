use num_complex::Complex64;

use super::operator::DiscreteOperator;
use super::propagator::{Factor, Propagator};
use super::semigroup::Semigroup;
use crate::coeffs::CoefficientField;
use crate::grid::{self, SpaceField};
use crate::quad::{midpoint_romberg, Extrapolated};
use crate::{Error, Result};

const MAX_LEVEL: u32 = 16;
const MIN_LEVEL: u32 = 2;

/// Number of halvings needed before `width·‖L‖ ≤ 1` at the start of a factor.
fn grading_depth(op: &DiscreteOperator, tau: f64) -> u32 {
    let stiffness = tau * op.norm_bound();
    if stiffness <= 1.0 {
        0
    } else {
        stiffness.log2().ceil() as u32
    }
}

/// Dyadically graded segments `[0, τ/2^J], [τ/2^J, τ/2^{J−1}], …, [τ/2, τ]`
/// as `(offset, width)` pairs.
fn graded_segments(tau: f64, depth: u32) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(depth as usize + 1);
    let first = tau / 2f64.powi(depth as i32);
    out.push((0.0, first));
    let mut a = first;
    for j in (0..depth).rev() {
        let b = tau / 2f64.powi(j as i32);
        out.push((a, b - a));
        a = b;
    }
    out
}

/// A graded segment together with the solution at its left end.
struct SegmentPlan {
    piece: usize,
    width: f64,
    start: Vec<Complex64>,
}

fn plan_segments(
    prop: &Propagator,
    factors: &[Factor],
    u0: &[Complex64],
    depth: impl Fn(&Factor) -> u32,
) -> Result<Vec<SegmentPlan>> {
    let mut out = Vec::new();
    let mut u = u0.to_vec();
    for f in factors {
        let sg = prop.semigroup(f.piece);
        let factor_start = u.clone();
        let mut seg_start = u.clone();
        for (_, w) in graded_segments(f.tau, depth(f)) {
            out.push(SegmentPlan { piece: f.piece, width: w, start: seg_start.clone() });
            seg_start = sg.step(w, &seg_start)?;
        }
        u = sg.step(f.tau, &factor_start)?;
    }
    Ok(out)
}

/// `∫₀ᵗ F(k(s), u(s)) ds` along `u(s) = Γ(s,0)u₀`, where `k(s)` is the active
/// piece. Each factor is split into dyadically graded segments that resolve
/// the initial layer; every segment gets `2^m` midpoint panels and the sums
/// are extrapolated in `m` until successive estimates differ by less than
/// `tol`.
pub fn integrate_along_solution(
    prop: &Propagator,
    u0: &[Complex64],
    t: f64,
    tol: f64,
    integrand: impl Fn(usize, &[Complex64]) -> f64,
) -> Result<Extrapolated<f64>> {
    let factors = prop.factors(t, 0.0)?;
    let plan = plan_segments(prop, &factors, u0, |f| grading_depth(prop.operator(f.piece), f.tau))?;
    midpoint_romberg(MIN_LEVEL, MAX_LEVEL, tol, |m| {
        let mut total = 0.0;
        for seg in &plan {
            let panels = 1usize << m;
            let delta = seg.width / panels as f64;
            let sg = prop.semigroup(seg.piece);
            let mut v = sg.step(0.5 * delta, &seg.start)?;
            for i in 0..panels {
                total += delta * integrand(seg.piece, &v);
                if i + 1 < panels {
                    v = sg.step(delta, &v)?;
                }
            }
        }
        Ok(total)
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DuhamelResult {
    /// `‖Γ(t,0)h − e^{−tL̲}h − ∫₀ᵗ e^{−(t−s)L̲}(L̲ − L(s))Γ(s,0)h ds‖ / ‖h‖`.
    pub residual: f64,
    /// Change between the last two extrapolated integrals, relative to `‖h‖`.
    pub quadrature_change: f64,
    pub level: u32,
}

/// Residual of the Duhamel representation of `Γ(t,0)h` around the
/// autonomous reference field `reference`.
pub fn duhamel_residual(
    prop: &Propagator,
    reference: &CoefficientField,
    h: &SpaceField,
    t: f64,
) -> Result<DuhamelResult> {
    if reference.piece_count() != 1 || reference.grid() != prop.grid() {
        return Err(Error::InvalidArgument("reference field must be autonomous on the same grid".into()));
    }
    if !h.is_scalar() || h.grid() != prop.grid() {
        return Err(Error::Shape("data must be a scalar field on the propagator grid".into()));
    }
    let grid = *prop.grid();
    let hnorm = h.norm();
    if hnorm == 0.0 {
        return Ok(DuhamelResult { residual: 0.0, quadrature_change: 0.0, level: 0 });
    }
    let reference_op = DiscreteOperator::assemble(reference, 0)?;
    let reference_sg = Semigroup::new(reference_op.clone(), prop.scheme())?;
    let factors = prop.factors(t, 0.0)?;
    let plan = plan_segments(prop, &factors, h.values(), |f| {
        grading_depth(prop.operator(f.piece), f.tau).max(grading_depth(&reference_op, f.tau))
    })?;
    let unweighted = hnorm / grid.cell_volume().sqrt();
    let zero = vec![Complex64::new(0.0, 0.0); grid.cells()];
    let integral = midpoint_romberg(MIN_LEVEL, MAX_LEVEL, 1e-8 * unweighted, |m| {
        let mut w = zero.clone();
        for seg in &plan {
            let panels = 1usize << m;
            let delta = seg.width / panels as f64;
            let sg = prop.semigroup(seg.piece);
            let op = sg.operator();
            let mut v = sg.step(0.5 * delta, &seg.start)?;
            let mut acc = zero.clone();
            for i in 0..panels {
                let lbar = reference_op.apply(&v);
                let lk = op.apply(&v);
                acc = reference_sg.step(delta, &acc)?;
                acc.iter_mut().zip(lbar.iter().zip(&lk)).for_each(|(a, (x, y))| *a += x - y);
                if i + 1 < panels {
                    v = sg.step(delta, &v)?;
                }
            }
            // Horner form of δ Σ_i e^{−(b − s_i)L̲} g(s_i), with b − s_i = (panels − i − ½)δ.
            let seg_integral = reference_sg.step(0.5 * delta, &acc)?;
            w = reference_sg.step(seg.width, &w)?;
            w.iter_mut().zip(&seg_integral).for_each(|(w, p)| *w += p * delta);
        }
        Ok(w)
    })?;
    let lhs = prop.apply_values(t, 0.0, h.values())?;
    let free = reference_sg.step(t, h.values())?;
    let diff: Vec<Complex64> = lhs.iter().zip(&free).zip(&integral.value).map(|((a, b), c)| a - b - c).collect();
    Ok(DuhamelResult {
        residual: grid::norm(&grid, &diff) / hnorm,
        quadrature_change: integral.error_estimate / unweighted,
        level: integral.level,
    })
}
