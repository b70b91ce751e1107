//! Maximal-regularity operators of an autonomous `L`:
//!
//! * `M_L f(t) = ∫₀ᵗ L e^{−(t−s)L} f(s) ds`
//! * `M̃_L f(t) = ∫₀ᵗ ∇ e^{−(t−s)L} div f(s) ds`
//! * `R_L f(t) = ∫₀ᵗ e^{−(t−s)L} div f(s) ds`
//!
//! The input is interpolated linearly in time between samples and each panel
//! is integrated in closed form through `φ₁(X) = (e^X − 1)/X` and
//! `φ₂(X) = (e^X − 1 − X)/X²` with `X = −wL`, so the weak singularity at
//! `s = t` never meets a quadrature node. Before the first sample the input
//! is held constant. `M̃_L` runs on gradient space through `L̂ = −∇ div A`,
//! which satisfies `∇ e^{−τL} = e^{−τL̂} ∇`; it never differentiates `R_L`.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::coeffs::CoefficientField;
use crate::evolve::DiscreteOperator;
use crate::grid::{self, SpaceField, SpaceTimeField};
use crate::linalg::{matvec, phi_functions, CMat};
use crate::{Error, Result};

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

struct Panel {
    e: CMat,
    phi1: CMat,
    phi2: CMat,
}

/// Dense panel data for one autonomous operator.
pub struct AutonomousKit {
    op: DiscreteOperator,
    l: CMat,
    lhat: CMat,
    scalar_panels: Mutex<HashMap<u64, Arc<Panel>>>,
    gradient_panels: Mutex<HashMap<u64, Arc<Panel>>>,
}

impl AutonomousKit {
    pub fn new(field: &CoefficientField) -> Result<Self> {
        if field.piece_count() != 1 {
            return Err(Error::InvalidArgument(format!(
                "maximal regularity needs an autonomous field, got {} pieces",
                field.piece_count()
            )));
        }
        let op = DiscreteOperator::assemble(field, 0)?;
        let l = op.dense()?;
        let lhat = op.gradient_space_dense()?;
        Ok(Self { op, l, lhat, scalar_panels: Mutex::new(HashMap::new()), gradient_panels: Mutex::new(HashMap::new()) })
    }

    pub fn operator(&self) -> &DiscreteOperator {
        &self.op
    }

    fn panel(&self, width: f64, gradient: bool) -> Arc<Panel> {
        let (cache, m) = if gradient { (&self.gradient_panels, &self.lhat) } else { (&self.scalar_panels, &self.l) };
        let key = width.to_bits();
        if let Some(p) = cache.lock().unwrap().get(&key) {
            return p.clone();
        }
        let (e, phi1, phi2) = phi_functions(&m.mapv(|z| z * (-width)));
        let p = Arc::new(Panel { e, phi1, phi2 });
        cache.lock().unwrap().entry(key).or_insert_with(|| p.clone());
        p
    }

    /// Runs the causal recursion `out_i = E_{w_i} out_{i−1} + c_i`, with
    /// `c_i` the closed-form contribution of the panel ending at `t_i`.
    fn recurse(
        &self,
        times: &[f64],
        inputs: &[Vec<Complex64>],
        gradient: bool,
        contribution: impl Fn(&Panel, f64, &[Complex64], &[Complex64]) -> Vec<Complex64>,
    ) -> Vec<Vec<Complex64>> {
        let len = inputs[0].len();
        let mut out = Vec::with_capacity(times.len());
        let mut prev = vec![ZERO; len];
        let mut prev_t = 0.0;
        for (i, (&t, fb)) in times.iter().zip(inputs).enumerate() {
            let w = t - prev_t;
            if w > 0.0 {
                let p = self.panel(w, gradient);
                let fa = if i == 0 { fb } else { &inputs[i - 1] };
                let c = contribution(&p, w, fa, fb);
                prev = matvec(&p.e, &prev).into_iter().zip(c).map(|(a, b)| a + b).collect();
            }
            out.push(prev.clone());
            prev_t = t;
        }
        out
    }

    fn check(&self, f: &SpaceTimeField, arity: usize) -> Result<()> {
        if f.grid() != self.op.grid() || f.arity() != arity {
            return Err(Error::Shape(format!("expected arity-{arity} samples on the operator grid")));
        }
        Ok(())
    }

    fn wrap(&self, f: &SpaceTimeField, arity: usize, values: Vec<Vec<Complex64>>) -> Result<SpaceTimeField> {
        let grid = *self.op.grid();
        let slices = values.into_iter().map(|v| SpaceField::new(grid, arity, v)).collect::<Result<Vec<_>>>()?;
        SpaceTimeField::new(grid, f.times().to_vec(), slices, None)
    }

    fn divergences(&self, f: &SpaceTimeField) -> Vec<Vec<Complex64>> {
        let grid = self.op.grid();
        f.slices()
            .iter()
            .map(|s| {
                let mut d = vec![ZERO; grid.cells()];
                grid::divergence_into(grid, s.values(), &mut d);
                d
            })
            .collect()
    }
}

/// Panel term `(I − E) f_b − (φ₁ − E)(f_b − f_a)`.
fn ml_panel(p: &Panel, fa: &[Complex64], fb: &[Complex64]) -> Vec<Complex64> {
    let diff: Vec<Complex64> = fb.iter().zip(fa).map(|(b, a)| b - a).collect();
    let e_fb = matvec(&p.e, fb);
    let e_diff = matvec(&p.e, &diff);
    let phi_diff = matvec(&p.phi1, &diff);
    (0..fb.len()).map(|i| fb[i] - e_fb[i] - (phi_diff[i] - e_diff[i])).collect()
}

/// Panel term `w φ₁ g_b − w (φ₁ − φ₂)(g_b − g_a)`.
fn smoothing_panel(p: &Panel, w: f64, ga: &[Complex64], gb: &[Complex64]) -> Vec<Complex64> {
    let diff: Vec<Complex64> = gb.iter().zip(ga).map(|(b, a)| b - a).collect();
    let a = matvec(&p.phi1, gb);
    let b = matvec(&p.phi1, &diff);
    let c = matvec(&p.phi2, &diff);
    (0..gb.len()).map(|i| (a[i] - b[i] + c[i]) * w).collect()
}

/// `M_L f` at the sample times of the scalar field `f`.
pub fn apply_ml(kit: &AutonomousKit, f: &SpaceTimeField) -> Result<SpaceTimeField> {
    kit.check(f, 1)?;
    let inputs: Vec<Vec<Complex64>> = f.slices().iter().map(|s| s.values().to_vec()).collect();
    let out = kit.recurse(f.times(), &inputs, false, |p, _, fa, fb| ml_panel(p, fa, fb));
    kit.wrap(f, 1, out)
}

/// `R_L f` at the sample times of the vector field `f`.
pub fn apply_rl(kit: &AutonomousKit, f: &SpaceTimeField) -> Result<SpaceTimeField> {
    let dim = kit.op.grid().dim();
    kit.check(f, dim)?;
    let inputs = kit.divergences(f);
    let out = kit.recurse(f.times(), &inputs, false, smoothing_panel);
    kit.wrap(f, 1, out)
}

/// `M̃_L f` at the sample times of the vector field `f`.
pub fn apply_ml_tilde(kit: &AutonomousKit, f: &SpaceTimeField) -> Result<SpaceTimeField> {
    let grid = *kit.op.grid();
    let dim = grid.dim();
    kit.check(f, dim)?;
    let inputs: Vec<Vec<Complex64>> = kit
        .divergences(f)
        .into_iter()
        .map(|d| {
            let mut g = vec![ZERO; dim * grid.cells()];
            grid::gradient_into(&grid, &d, &mut g);
            g
        })
        .collect();
    let out = kit.recurse(f.times(), &inputs, true, smoothing_panel);
    kit.wrap(f, dim, out)
}

/// Lower estimate of an operator norm: the largest ratio
/// `target(op f) / source(f)` over the probes.
pub fn estimate_operator_norm(
    op: impl Fn(&SpaceTimeField) -> Result<SpaceTimeField>,
    source_norm: impl Fn(&SpaceTimeField) -> Result<f64>,
    target_norm: impl Fn(&SpaceTimeField) -> Result<f64>,
    probes: &[SpaceTimeField],
) -> Result<f64> {
    if probes.len() < 16 {
        return Err(Error::InvalidArgument(format!("need at least 16 probes, got {}", probes.len())));
    }
    let mut best: f64 = 0.0;
    for f in probes {
        let s = source_norm(f)?;
        if s > 0.0 {
            best = best.max(target_norm(&op(f)?)? / s);
        }
    }
    Ok(best)
}

/// Seeded random probes with independent complex uniform samples.
pub fn random_probes(
    grid: grid::Grid,
    times: &[f64],
    arity: usize,
    count: usize,
    seed: u64,
) -> Result<Vec<SpaceTimeField>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let slices = times
                .iter()
                .map(|_| {
                    let v = (0..grid.cells() * arity)
                        .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
                        .collect();
                    SpaceField::new(grid, arity, v)
                })
                .collect::<Result<Vec<_>>>()?;
            SpaceTimeField::new(grid, times.to_vec(), slices, None)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coeffs::{make_scenario, random_elliptic_staircase, Scenario};
    use crate::fourier;
    use crate::grid::{discrete_gradient, Grid};
    use crate::norms::space_time_l2;
    use proptest::prelude::*;

    fn uniform(k: usize, t: f64) -> Vec<f64> {
        (1..=k).map(|i| t * i as f64 / k as f64).collect()
    }

    fn heat_kit(n: usize, period: f64) -> (Grid, AutonomousKit) {
        let grid = Grid::new(1, n, period).unwrap();
        let a = make_scenario(&Scenario::Heat {}, grid, 1.0, 0).unwrap();
        (grid, AutonomousKit::new(&a).unwrap())
    }

    fn max_diff(a: &SpaceTimeField, b: &SpaceTimeField) -> f64 {
        a.slices().iter().zip(b.slices()).map(|(x, y)| x.max_abs_diff(y)).fold(0.0, f64::max)
    }

    #[test]
    fn ml_of_semigroup_orbit() {
        // f(s) = e^{−sL}g gives M_L f(t) = tLe^{−tL}g.
        let (grid, kit) = heat_kit(32, 16.0);
        let g = fourier::mode(&grid, [1, 0]);
        let mu = fourier::laplacian_symbol(&grid, 1);
        let times: Vec<f64> = (0..=256).map(|i| i as f64 / 256.0).collect();
        let slices = times
            .iter()
            .map(|&s| SpaceField::scalar(grid, g.iter().map(|z| z * (-mu * s).exp()).collect()).unwrap())
            .collect();
        let f = SpaceTimeField::new(grid, times.clone(), slices, None).unwrap();
        let m = apply_ml(&kit, &f).unwrap();
        for (t, s) in times.iter().zip(m.slices()) {
            let c = t * mu * (-t * mu).exp();
            let err = s.values().iter().zip(&g).map(|(a, b)| (a - b * c).norm()).fold(0.0, f64::max);
            assert!(err <= 1e-8, "t = {t}: {err}");
        }
    }

    #[test]
    fn ml_tilde_spectral_oracle() {
        // f = ∇e^{−sL}g gives M̃_L f(t) = −t∇Le^{−tL}g.
        let (grid, kit) = heat_kit(32, 16.0);
        let g = SpaceField::scalar(grid, fourier::mode(&grid, [1, 0])).unwrap();
        let dg = discrete_gradient(&g).unwrap();
        let mu = fourier::laplacian_symbol(&grid, 1);
        let times: Vec<f64> = (0..=256).map(|i| i as f64 / 256.0).collect();
        let slices = times.iter().map(|&s| dg.scaled(Complex64::new((-mu * s).exp(), 0.0))).collect();
        let f = SpaceTimeField::new(grid, times.clone(), slices, None).unwrap();
        let m = apply_ml_tilde(&kit, &f).unwrap();
        for (t, s) in times.iter().zip(m.slices()) {
            let expected = dg.scaled(Complex64::new(-t * mu * (-t * mu).exp(), 0.0));
            assert!(s.max_abs_diff(&expected) <= 1e-8);
        }
    }

    #[test]
    fn constants_and_zero() {
        let (grid, kit) = heat_kit(16, 1.0);
        let times = uniform(20, 0.5);
        let ones = times.iter().map(|_| SpaceField::constant(grid, Complex64::new(1.0, 0.0))).collect();
        let f = SpaceTimeField::new(grid, times.clone(), ones, None).unwrap();
        assert!(apply_ml(&kit, &f).unwrap().slices().iter().all(|s| s.norm() < 1e-13));
        assert!(apply_rl(&kit, &f).unwrap().slices().iter().all(|s| s.norm() == 0.0));
        assert!(apply_ml_tilde(&kit, &f).unwrap().slices().iter().all(|s| s.norm() == 0.0));
        let zero = f.map_slices(|s| s.scaled(ZERO));
        assert!(apply_ml(&kit, &zero).unwrap().slices().iter().all(|s| s.norm() == 0.0));
    }

    #[test]
    fn gradient_of_rl_is_ml_tilde() {
        for dim in [1usize, 2] {
            let grid = Grid::new(dim, if dim == 1 { 32 } else { 6 }, 1.0).unwrap();
            let a = random_elliptic_staircase(grid, 1.0, 1, 0.5, 2.0, 21).unwrap();
            let kit = AutonomousKit::new(&a).unwrap();
            let times = uniform(40, 0.2);
            for f in random_probes(grid, &times, dim, 3, 5).unwrap() {
                let r = apply_rl(&kit, &f).unwrap().with_gradients().unwrap();
                let m = apply_ml_tilde(&kit, &f).unwrap();
                let scale = m.slices().iter().map(|s| s.norm()).fold(0.0, f64::max);
                for (g, s) in r.gradient_slices().unwrap().iter().zip(m.slices()) {
                    assert!(g.max_abs_diff(s) <= 1e-9 * scale.max(1.0));
                }
            }
        }
    }

    #[test]
    fn operator_norm_estimates() {
        let (grid, kit) = heat_kit(16, 1.0);
        let times = uniform(16, 0.1);
        let probes = random_probes(grid, &times, 1, 16, 3).unwrap();
        let l2 = |f: &SpaceTimeField| Ok(space_time_l2(f));
        let zero = estimate_operator_norm(|f| Ok(f.map_slices(|s| s.scaled(ZERO))), l2, l2, &probes).unwrap();
        assert_eq!(zero, 0.0);
        let id = estimate_operator_norm(|f| Ok(f.clone()), l2, l2, &probes).unwrap();
        assert!(id >= 1.0 - 1e-12);
        let ml = estimate_operator_norm(|f| apply_ml(&kit, f), l2, l2, &probes).unwrap();
        assert!(ml.is_finite() && ml > 0.0);
        assert!(estimate_operator_norm(|f| Ok(f.clone()), l2, l2, &probes[..4]).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(8))]

        #[test]
        fn causal_and_linear(seed in 0u64..500, cut in 3usize..17, a in -2.0f64..2.0, b in -2.0f64..2.0) {
            let grid = Grid::new(1, 16, 1.0).unwrap();
            let field = random_elliptic_staircase(grid, 1.0, 1, 0.5, 2.0, seed).unwrap();
            let kit = AutonomousKit::new(&field).unwrap();
            let times = uniform(20, 0.1);
            let p = random_probes(grid, &times, 1, 3, seed).unwrap();
            let base = apply_ml(&kit, &p[0]).unwrap();
            // Replace the samples after index `cut`.
            let mut slices = p[0].slices().to_vec();
            for (i, s) in slices.iter_mut().enumerate().skip(cut + 1) {
                *s = p[1].slices()[i].clone();
            }
            let modified = SpaceTimeField::new(grid, times.clone(), slices, None).unwrap();
            let out = apply_ml(&kit, &modified).unwrap();
            for i in 0..=cut {
                prop_assert_eq!(&out.slices()[i], &base.slices()[i]);
            }
            let ca = Complex64::new(a, 0.3);
            let cb = Complex64::new(0.1, b);
            let combo: Vec<SpaceField> = p[1].slices().iter().zip(p[2].slices())
                .map(|(x, y)| {
                    let v = x.values().iter().zip(y.values()).map(|(x, y)| x * ca + y * cb).collect();
                    SpaceField::scalar(grid, v).unwrap()
                })
                .collect();
            let lhs = apply_ml(&kit, &SpaceTimeField::new(grid, times.clone(), combo, None).unwrap()).unwrap();
            let (x, y) = (apply_ml(&kit, &p[1]).unwrap(), apply_ml(&kit, &p[2]).unwrap());
            let rhs: Vec<SpaceField> = x.slices().iter().zip(y.slices())
                .map(|(x, y)| {
                    let v = x.values().iter().zip(y.values()).map(|(x, y)| x * ca + y * cb).collect();
                    SpaceField::scalar(grid, v).unwrap()
                })
                .collect();
            let rhs = SpaceTimeField::new(grid, times, rhs, None).unwrap();
            prop_assert!(max_diff(&lhs, &rhs) <= 1e-11 * (1.0 + space_time_l2(&rhs)));
        }
    }
}
