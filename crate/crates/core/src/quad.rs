//! Quadrature helpers: dyadic midpoint sums with Richardson extrapolation,
//! adaptive Simpson for vector-valued integrands, and trapezoid weights for
//! sampled time series.

use num_complex::Complex64;

use crate::{Error, Result};

/// Values that can be combined linearly inside an extrapolation table.
pub trait Quadrature: Clone {
    fn lincomb(&self, a: f64, other: &Self, b: f64) -> Self;
    fn distance(&self, other: &Self) -> f64;
}

impl Quadrature for f64 {
    fn lincomb(&self, a: f64, other: &Self, b: f64) -> Self {
        a * self + b * other
    }
    fn distance(&self, other: &Self) -> f64 {
        (self - other).abs()
    }
}

impl Quadrature for Vec<Complex64> {
    fn lincomb(&self, a: f64, other: &Self, b: f64) -> Self {
        self.iter().zip(other).map(|(x, y)| x * a + y * b).collect()
    }
    fn distance(&self, other: &Self) -> f64 {
        self.iter().zip(other).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>().sqrt()
    }
}

impl Quadrature for Vec<f64> {
    fn lincomb(&self, a: f64, other: &Self, b: f64) -> Self {
        self.iter().zip(other).map(|(x, y)| x * a + y * b).collect()
    }
    fn distance(&self, other: &Self) -> f64 {
        self.iter().zip(other).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
    }
}

#[derive(Clone, Debug)]
pub struct Extrapolated<V> {
    pub value: V,
    pub error_estimate: f64,
    pub level: u32,
}

const MAX_RICHARDSON_DEPTH: usize = 5;

/// Romberg table over dyadic midpoint sums. `midpoint(m)` must return the
/// composite midpoint rule with `2^m` panels per smooth piece; the error then
/// expands in even powers of the panel width. Stops once two successive
/// diagonal entries differ by less than `tol`.
pub fn midpoint_romberg<V: Quadrature>(
    min_level: u32,
    max_level: u32,
    tol: f64,
    mut midpoint: impl FnMut(u32) -> Result<V>,
) -> Result<Extrapolated<V>> {
    let mut prev_row: Vec<V> = Vec::new();
    let mut last_err = f64::INFINITY;
    for m in min_level..=max_level {
        let mut row = vec![midpoint(m)?];
        for j in 1..=prev_row.len().min(MAX_RICHARDSON_DEPTH) {
            let f = 4f64.powi(j as i32);
            let next = row[j - 1].lincomb(f / (f - 1.0), &prev_row[j - 1], -1.0 / (f - 1.0));
            row.push(next);
        }
        if !prev_row.is_empty() {
            let best = row.last().unwrap();
            let prev_best = prev_row.last().unwrap();
            last_err = best.distance(prev_best);
            if last_err < tol {
                return Ok(Extrapolated { value: best.clone(), error_estimate: last_err, level: m });
            }
        }
        prev_row = row;
    }
    Err(Error::Quadrature(format!(
        "midpoint extrapolation stalled at level {max_level} (last change {last_err:e}, tolerance {tol:e})"
    )))
}

/// Adaptive Simpson rule for vector-valued integrands, absolute tolerance in
/// the max norm.
pub fn adaptive_simpson<V: Quadrature>(f: &impl Fn(f64) -> V, a: f64, b: f64, tol: f64) -> Result<V> {
    let fa = f(a);
    let fm = f(0.5 * (a + b));
    let fb = f(b);
    let whole = simpson(&fa, &fm, &fb, b - a);
    simpson_rec(f, a, b, fa, fm, fb, whole, tol, 50)
}

fn simpson<V: Quadrature>(fa: &V, fm: &V, fb: &V, width: f64) -> V {
    let w = width / 6.0;
    fa.lincomb(w, fm, 4.0 * w).lincomb(1.0, fb, w)
}

#[allow(clippy::too_many_arguments)]
fn simpson_rec<V: Quadrature>(
    f: &impl Fn(f64) -> V,
    a: f64,
    b: f64,
    fa: V,
    fm: V,
    fb: V,
    whole: V,
    tol: f64,
    depth: u32,
) -> Result<V> {
    let m = 0.5 * (a + b);
    let flm = f(0.5 * (a + m));
    let frm = f(0.5 * (m + b));
    let left = simpson(&fa, &flm, &fm, m - a);
    let right = simpson(&fm, &frm, &fb, b - m);
    let both = left.lincomb(1.0, &right, 1.0);
    let delta = both.distance(&whole);
    if delta <= 15.0 * tol {
        // Richardson correction of the two-panel estimate.
        return Ok(both.lincomb(16.0 / 15.0, &whole, -1.0 / 15.0));
    }
    if depth == 0 {
        return Err(Error::Quadrature(format!(
            "adaptive Simpson exhausted its depth on [{a}, {b}] (change {delta:e})"
        )));
    }
    let l = simpson_rec(f, a, m, fa, flm, fm.clone(), left, 0.5 * tol, depth - 1)?;
    let r = simpson_rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)?;
    Ok(l.lincomb(1.0, &r, 1.0))
}

/// Trapezoid weights for samples at `times` (no extrapolation beyond the
/// first and last sample).
pub fn trapezoid_weights(times: &[f64]) -> Vec<f64> {
    let n = times.len();
    let mut w = vec![0.0; n];
    for i in 0..n.saturating_sub(1) {
        let d = 0.5 * (times[i + 1] - times[i]);
        w[i] += d;
        w[i + 1] += d;
    }
    w
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn romberg_integrates_exponential() {
        // ∫₀¹ e^{−5s} ds via dyadic midpoint sums.
        let exact = (1.0 - (-5.0f64).exp()) / 5.0;
        let r = midpoint_romberg(1, 20, 1e-13, |m| {
            let n = 1usize << m;
            let d = 1.0 / n as f64;
            Ok((0..n).map(|i| (-5.0 * (i as f64 + 0.5) * d).exp() * d).sum::<f64>())
        })
        .unwrap();
        assert!((r.value - exact).abs() < 1e-13);
    }

    #[test]
    fn romberg_reports_stagnation() {
        let r = midpoint_romberg(0, 3, 1e-30, |m| Ok(m as f64));
        assert!(matches!(r, Err(Error::Quadrature(_))));
    }

    #[test]
    fn simpson_handles_vectors() {
        let v = adaptive_simpson(&|t: f64| vec![t, t * t, t.sin()], 0.0, 1.0, 1e-12).unwrap();
        assert!((v[0] - 0.5).abs() < 1e-12);
        assert!((v[1] - 1.0 / 3.0).abs() < 1e-12);
        assert!((v[2] - (1.0 - 1f64.cos())).abs() < 1e-11);
    }

    #[test]
    fn trapezoid_is_exact_for_linear() {
        let t = [0.0, 0.1, 0.35, 1.0];
        let w = trapezoid_weights(&t);
        let s: f64 = w.iter().zip(&t).map(|(w, t)| w * (2.0 * t + 1.0)).sum();
        assert!((s - 2.0).abs() < 1e-14);
    }
}
