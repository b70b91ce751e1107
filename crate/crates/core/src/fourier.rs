//! Discrete Fourier analysis on the torus grid.
//!
//! Forward transform convention: `F(k) = Σ_x f(x) e^{−2πi k·x/n}` (unnormalised),
//! inverse divides by the cell count.

use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::grid::Grid;

fn transform(grid: &Grid, values: &mut [Complex64], inverse: bool) {
    let n = grid.points_per_axis();
    let mut planner = FftPlanner::<f64>::new();
    let fft = if inverse { planner.plan_fft_inverse(n) } else { planner.plan_fft_forward(n) };
    match grid.dim() {
        1 => fft.process(values),
        _ => {
            // Rows are contiguous; columns go through a scratch buffer.
            for row in values.chunks_mut(n) {
                fft.process(row);
            }
            let mut col = vec![Complex64::new(0.0, 0.0); n];
            for j in 0..n {
                for i in 0..n {
                    col[i] = values[i * n + j];
                }
                fft.process(&mut col);
                for i in 0..n {
                    values[i * n + j] = col[i];
                }
            }
        }
    }
}

pub fn forward(grid: &Grid, values: &[Complex64]) -> Vec<Complex64> {
    let mut out = values.to_vec();
    transform(grid, &mut out, false);
    out
}

pub fn inverse(grid: &Grid, coefficients: &[Complex64]) -> Vec<Complex64> {
    let mut out = coefficients.to_vec();
    transform(grid, &mut out, true);
    let scale = 1.0 / grid.cells() as f64;
    out.iter_mut().for_each(|v| *v *= scale);
    out
}

/// Frequency index per axis of flat spectral position `k` (same layout as cells).
pub fn frequency(grid: &Grid, k: usize) -> [usize; 2] {
    grid.coords(k)
}

/// `|σ(k)|² = Σ_j 4 sin²(π k_j / n) / h²`, the symbol of `−div ∇`.
pub fn laplacian_symbol(grid: &Grid, k: usize) -> f64 {
    let n = grid.points_per_axis() as f64;
    let h = grid.spacing();
    let f = frequency(grid, k);
    (0..grid.dim()).map(|j| 4.0 * (PI * f[j] as f64 / n).sin().powi(2) / (h * h)).sum()
}

/// Symbol of the forward-difference gradient, component `axis`.
pub fn gradient_symbol(grid: &Grid, k: usize, axis: usize) -> Complex64 {
    let n = grid.points_per_axis() as f64;
    let f = frequency(grid, k);
    (Complex64::from_polar(1.0, 2.0 * PI * f[axis] as f64 / n) - 1.0) / grid.spacing()
}

/// Smallest nonzero value of the Laplacian symbol (discrete Poincaré constant
/// on mean-zero functions).
pub fn spectral_gap(grid: &Grid) -> f64 {
    let n = grid.points_per_axis() as f64;
    let h = grid.spacing();
    4.0 * (PI / n).sin().powi(2) / (h * h)
}

/// Heat semigroup `e^{τ div∇}` applied spectrally.
pub fn heat_evolve(grid: &Grid, values: &[Complex64], tau: f64) -> Vec<Complex64> {
    let mut spec = forward(grid, values);
    for (k, c) in spec.iter_mut().enumerate() {
        *c *= (-tau * laplacian_symbol(grid, k)).exp();
    }
    inverse(grid, &spec)
}

/// Scalar Fourier mode `e^{2πi k·x/ℓ}` at cell centers.
pub fn mode(grid: &Grid, k: [usize; 2]) -> Vec<Complex64> {
    let l = grid.period();
    (0..grid.cells())
        .map(|i| {
            let x = grid.center(i);
            let phase = 2.0 * PI * (k[0] as f64 * x[0] + k[1] as f64 * x[1]) / l;
            Complex64::from_polar(1.0, phase)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{discrete_divergence, discrete_gradient, SpaceField};

    #[test]
    fn round_trip_2d() {
        let g = Grid::new(2, 8, 1.0).unwrap();
        let v: Vec<Complex64> = (0..64).map(|i| Complex64::new(i as f64, (i * i % 7) as f64)).collect();
        let back = inverse(&g, &forward(&g, &v));
        for (a, b) in v.iter().zip(&back) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn modes_diagonalise_laplacian() {
        for dim in [1usize, 2] {
            let g = Grid::new(dim, 16, 2.0).unwrap();
            let k = if dim == 1 { [3, 0] } else { [3, 5] };
            let u = SpaceField::scalar(g, mode(&g, k)).unwrap();
            let lu = discrete_divergence(&discrete_gradient(&u).unwrap()).unwrap();
            let idx = g.index(k);
            let mu = laplacian_symbol(&g, idx);
            for (a, b) in lu.values().iter().zip(u.values()) {
                assert!((a + b * mu).norm() < 1e-10 * mu);
            }
            let s: f64 = (0..dim).map(|a| gradient_symbol(&g, idx, a).norm_sqr()).sum();
            assert!((s - mu).abs() < 1e-10 * mu);
        }
    }
}
