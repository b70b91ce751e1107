use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::coeffs::{make_scenario, CoefficientField, Scenario};
use crate::evolve::{Propagator, Scheme};
use crate::grid::{Grid, SpaceField, SpaceTimeField};
use crate::{Result, DENSE_CELL_LIMIT};

/// Everything needed to rebuild a scenario on any grid of the same shape.
#[derive(Clone, Debug, PartialEq)]
pub struct Setup {
    pub scenario: Scenario,
    pub grid: Grid,
    pub scheme: Scheme,
    pub horizon: f64,
    pub seed: u64,
}

impl Setup {
    pub fn field(&self) -> Result<CoefficientField> {
        make_scenario(&self.scenario, self.grid, self.horizon, self.seed)
    }

    pub fn propagator(&self) -> Result<Propagator> {
        Propagator::build(self.field()?, self.scheme)
    }

    /// Same scenario with `n` points per axis. Exact exponentials are
    /// replaced by Crank–Nicolson when the grid is too large for them.
    pub fn with_points(&self, n: usize) -> Result<Setup> {
        let grid = Grid::new(self.grid.dim(), n, self.grid.period())?;
        let scheme = if self.scheme == Scheme::ExactExpm && grid.cells() > DENSE_CELL_LIMIT / 4 {
            Scheme::CrankNicolson { substeps: None }
        } else {
            self.scheme
        };
        Ok(Setup { grid, scheme, ..self.clone() })
    }

    pub fn refined(&self) -> Result<Setup> {
        self.with_points(2 * self.grid.points_per_axis())
    }
}

/// Fraction of the cell around `center` (width `h`) covered by `[lo, hi]`,
/// measured along one periodic axis.
fn overlap(center: f64, h: f64, lo: f64, hi: f64, period: f64) -> f64 {
    (-1..=1)
        .map(|k| {
            let shift = k as f64 * period;
            let a = (center - 0.5 * h).max(lo + shift);
            let b = (center + 0.5 * h).min(hi + shift);
            (b - a).max(0.0)
        })
        .sum::<f64>()
        / h
}

/// Cell averages of the indicator of the box `Π_j [c_j − w, c_j + w]`.
pub fn box_indicator(grid: &Grid, center: [f64; 2], half_width: f64) -> SpaceField {
    let h = grid.spacing();
    let l = grid.period();
    SpaceField::from_fn(*grid, |x| {
        let v: f64 =
            (0..grid.dim()).map(|j| overlap(x[j], h, center[j] - half_width, center[j] + half_width, l)).product();
        Complex64::new(v, 0.0)
    })
}

/// Cell averages of the step `1` on `{x₀ ∈ [0, ℓ/2)}`, `0` elsewhere.
pub fn half_step(grid: &Grid) -> SpaceField {
    let h = grid.spacing();
    let l = grid.period();
    SpaceField::from_fn(*grid, |x| Complex64::new(overlap(x[0], h, 0.0, 0.5 * l, l), 0.0))
}

pub fn remove_mean(f: &SpaceField) -> SpaceField {
    let m = f.mean();
    let v = f.values().iter().map(|z| z - m).collect();
    SpaceField::scalar(*f.grid(), v).expect("same shape")
}

/// Mean-zero rough datum defined in physical coordinates: a box of side
/// `ℓ/8` centred in the torus, minus its mean.
pub fn rough_mean_zero(grid: &Grid) -> SpaceField {
    let c = 0.5 * grid.period();
    remove_mean(&box_indicator(grid, [c, c], grid.period() / 16.0))
}

/// Mean-zero smooth datum built from a few low Fourier modes.
pub fn smooth_mean_zero(grid: &Grid) -> SpaceField {
    let l = grid.period();
    let two_d = grid.dim() == 2;
    let f = SpaceField::from_fn(*grid, |x| {
        let (a, b) = (2.0 * PI * x[0] / l, 2.0 * PI * x[1] / l);
        let mut v = Complex64::new(a.cos() + 0.5 * (2.0 * a + 0.3).sin(), 0.25 * (3.0 * a).cos());
        if two_d {
            v += Complex64::new(0.7 * (b + 0.1).sin() + 0.3 * (a + b).cos(), 0.0);
        }
        v
    });
    remove_mean(&f)
}

/// Seeded complex field with independent uniform entries.
pub fn random_field(grid: &Grid, rng: &mut ChaCha8Rng) -> SpaceField {
    let v =
        (0..grid.cells()).map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect();
    SpaceField::scalar(*grid, v).expect("scalar shape")
}

pub fn rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

/// `(t, s)` pairs spread over `[0, T]`, including `t = s`.
pub fn time_pairs(horizon: f64) -> Vec<(f64, f64)> {
    let mut out = vec![(0.0, 0.0)];
    for s in [0.0, horizon / 3.0] {
        for d in [horizon / 16.0, horizon / 4.0, 2.0 * horizon / 3.0] {
            out.push((s + d, s));
        }
    }
    out
}

/// `T·2^{−j/per_octave}` for `j = octaves·per_octave, …, 0`, increasing.
pub fn geometric_times(horizon: f64, octaves: u32, per_octave: u32) -> Vec<f64> {
    let total = octaves * per_octave;
    (0..=total).rev().map(|j| horizon * 2f64.powf(-(j as f64) / per_octave as f64)).collect()
}

/// Samples of `u(t) = Γ(t, 0)u₀` at increasing `times` (all positive or
/// starting at zero), with gradients attached.
pub fn solve_at(prop: &Propagator, u0: &SpaceField, times: &[f64]) -> Result<SpaceTimeField> {
    let mut slices = Vec::with_capacity(times.len());
    let mut u = u0.values().to_vec();
    let mut prev = 0.0;
    for &t in times {
        u = prop.apply_values(t, prev, &u)?;
        prev = t;
        slices.push(SpaceField::scalar(*prop.grid(), u.clone())?);
    }
    SpaceTimeField::new(*prop.grid(), times.to_vec(), slices, None)?.with_gradients()
}

/// Cell at the geometric centre of the torus.
pub fn middle_cell(grid: &Grid) -> usize {
    let m = grid.points_per_axis() / 2;
    grid.index([m, if grid.dim() == 2 { m } else { 0 }])
}
