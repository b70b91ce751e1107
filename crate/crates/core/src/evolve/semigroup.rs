use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::krylov::gmres;
use super::operator::DiscreteOperator;
use crate::grid::{Grid, SpaceField};
use crate::linalg::{expm, identity, matvec, solve, CMat};
use crate::{Error, Result, DENSE_CELL_LIMIT};

const SOLVER_TOL: f64 = 1e-12;

/// Time discretisation of `e^{−τL}`. `substeps: None` selects
/// `max(1, ⌈τ/h²⌉)` substeps per factor.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Scheme {
    ExactExpm,
    CrankNicolson {
        #[serde(default)]
        substeps: Option<usize>,
    },
    BackwardEuler {
        #[serde(default)]
        substeps: Option<usize>,
    },
}

impl Scheme {
    /// Exact exponentials while dense matrices fit, Crank–Nicolson otherwise.
    pub fn default_for(grid: &Grid) -> Scheme {
        if grid.cells() <= DENSE_CELL_LIMIT {
            Scheme::ExactExpm
        } else {
            Scheme::CrankNicolson { substeps: None }
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Scheme::ExactExpm => "exact_expm",
            Scheme::CrankNicolson { .. } => "crank_nicolson",
            Scheme::BackwardEuler { .. } => "backward_euler",
        }
    }
}

/// `τ ↦ e^{−τL}` for one frozen operator under a given scheme. Dense factors
/// are computed once per step length and shared afterwards.
#[derive(Debug)]
pub struct Semigroup {
    op: DiscreteOperator,
    adjoint_op: DiscreteOperator,
    scheme: Scheme,
    dense_op: OnceLock<CMat>,
    cache: Mutex<HashMap<u64, Arc<CMat>>>,
}

impl Semigroup {
    pub fn new(op: DiscreteOperator, scheme: Scheme) -> Result<Self> {
        let cells = op.grid().cells();
        if scheme == Scheme::ExactExpm && cells > DENSE_CELL_LIMIT {
            return Err(Error::TooLarge { cells, limit: DENSE_CELL_LIMIT });
        }
        if let Scheme::CrankNicolson { substeps: Some(0) } | Scheme::BackwardEuler { substeps: Some(0) } = scheme {
            return Err(Error::InvalidParameters("substeps must be positive".into()));
        }
        Ok(Self { adjoint_op: op.adjoint(), op, scheme, dense_op: OnceLock::new(), cache: Mutex::new(HashMap::new()) })
    }

    pub fn operator(&self) -> &DiscreteOperator {
        &self.op
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    pub fn substeps(&self, tau: f64) -> usize {
        match self.scheme {
            Scheme::ExactExpm => 1,
            Scheme::CrankNicolson { substeps: Some(m) } | Scheme::BackwardEuler { substeps: Some(m) } => m,
            _ => {
                let h = self.op.grid().spacing();
                ((tau / (h * h)).ceil() as usize).max(1)
            }
        }
    }

    fn check_tau(tau: f64) -> Result<()> {
        if tau >= 0.0 && tau.is_finite() {
            Ok(())
        } else {
            Err(Error::InvalidTime(format!("step length {tau} must be non-negative")))
        }
    }

    fn operator_dense(&self) -> Result<&CMat> {
        if let Some(m) = self.dense_op.get() {
            return Ok(m);
        }
        let m = self.op.dense()?;
        Ok(self.dense_op.get_or_init(|| m))
    }

    /// Applies the scheme's approximation of `e^{−τL}` to raw cell values.
    pub fn step(&self, tau: f64, u: &[Complex64]) -> Result<Vec<Complex64>> {
        Self::check_tau(tau)?;
        if tau == 0.0 {
            return Ok(u.to_vec());
        }
        match self.scheme {
            Scheme::ExactExpm => Ok(matvec(&*self.dense(tau)?, u)),
            Scheme::CrankNicolson { .. } => {
                let m = self.substeps(tau);
                let a = tau / (2.0 * m as f64);
                let mut x = u.to_vec();
                for _ in 0..m {
                    let lx = self.op.apply(&x);
                    let rhs: Vec<Complex64> = x.iter().zip(&lx).map(|(x, l)| x - l * a).collect();
                    x = self.shifted_solve(a, &rhs, x)?;
                }
                Ok(x)
            }
            Scheme::BackwardEuler { .. } => {
                let m = self.substeps(tau);
                let a = tau / m as f64;
                let mut x = u.to_vec();
                for _ in 0..m {
                    x = self.shifted_solve(a, &x.clone(), x)?;
                }
                Ok(x)
            }
        }
    }

    /// Applies the conjugate transpose of [`Semigroup::step`]'s map.
    pub fn step_adjoint(&self, tau: f64, u: &[Complex64]) -> Result<Vec<Complex64>> {
        Self::check_tau(tau)?;
        if tau == 0.0 {
            return Ok(u.to_vec());
        }
        match self.scheme {
            Scheme::ExactExpm => {
                let e = self.dense(tau)?;
                let conj: Vec<Complex64> = u.iter().map(|z| z.conj()).collect();
                Ok(matvec(&e.t().to_owned(), &conj).into_iter().map(|z| z.conj()).collect())
            }
            Scheme::CrankNicolson { .. } => {
                // ((I + aL)⁻¹(I − aL))ᴴ = (I − aLᴴ)(I + aLᴴ)⁻¹.
                let m = self.substeps(tau);
                let a = tau / (2.0 * m as f64);
                let mut x = u.to_vec();
                for _ in 0..m {
                    let y = self.shifted_solve_with(&self.adjoint_op, a, &x, x.clone())?;
                    let ly = self.adjoint_op.apply(&y);
                    x = y.iter().zip(&ly).map(|(y, l)| y - l * a).collect();
                }
                Ok(x)
            }
            Scheme::BackwardEuler { .. } => {
                let m = self.substeps(tau);
                let a = tau / m as f64;
                let mut x = u.to_vec();
                for _ in 0..m {
                    x = self.shifted_solve_with(&self.adjoint_op, a, &x.clone(), x)?;
                }
                Ok(x)
            }
        }
    }

    /// Solves `(I + aL)x = b` to the scheme's residual tolerance.
    fn shifted_solve(&self, a: f64, b: &[Complex64], guess: Vec<Complex64>) -> Result<Vec<Complex64>> {
        self.shifted_solve_with(&self.op, a, b, guess)
    }

    fn shifted_solve_with(
        &self,
        op: &DiscreteOperator,
        a: f64,
        b: &[Complex64],
        guess: Vec<Complex64>,
    ) -> Result<Vec<Complex64>> {
        let apply = |x: &[Complex64]| -> Vec<Complex64> {
            let lx = op.apply(x);
            x.iter().zip(&lx).map(|(x, l)| x + l * a).collect()
        };
        gmres(apply, b, Some(guess), SOLVER_TOL)
    }

    pub fn step_field(&self, tau: f64, u: &SpaceField) -> Result<SpaceField> {
        if !u.is_scalar() || u.grid() != self.op.grid() {
            return Err(Error::Shape("semigroup expects a scalar field on its grid".into()));
        }
        SpaceField::scalar(*u.grid(), self.step(tau, u.values())?)
    }

    /// Dense matrix of the scheme's `e^{−τL}`.
    pub fn dense(&self, tau: f64) -> Result<Arc<CMat>> {
        Self::check_tau(tau)?;
        let key = tau.to_bits();
        if let Some(m) = self.cache.lock().unwrap().get(&key) {
            return Ok(m.clone());
        }
        let n = self.op.grid().cells();
        if n > DENSE_CELL_LIMIT {
            return Err(Error::TooLarge { cells: n, limit: DENSE_CELL_LIMIT });
        }
        let l = self.operator_dense()?;
        let m = match self.scheme {
            Scheme::ExactExpm => expm(&l.mapv(|z| z * (-tau))),
            Scheme::CrankNicolson { .. } => {
                let steps = self.substeps(tau);
                let a = tau / (2.0 * steps as f64);
                let id = identity(n);
                let one = solve(&(&id + &l.mapv(|z| z * a)), &(&id - &l.mapv(|z| z * a)));
                matrix_power(one, steps)
            }
            Scheme::BackwardEuler { .. } => {
                let steps = self.substeps(tau);
                let a = tau / steps as f64;
                let id = identity(n);
                let one = solve(&(&id + &l.mapv(|z| z * a)), &id);
                matrix_power(one, steps)
            }
        };
        let m = Arc::new(m);
        self.cache.lock().unwrap().entry(key).or_insert_with(|| m.clone());
        Ok(m)
    }
}

fn matrix_power(mut base: CMat, mut e: usize) -> CMat {
    let mut acc: Option<CMat> = None;
    while e > 0 {
        if e & 1 == 1 {
            acc = Some(match acc {
                None => base.clone(),
                Some(a) => a.dot(&base),
            });
        }
        e >>= 1;
        if e > 0 {
            base = base.dot(&base);
        }
    }
    acc.unwrap_or_else(|| identity(base.nrows()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coeffs::{make_scenario, random_elliptic_staircase, Scenario};
    use crate::fourier;
    use crate::grid::norm;
    use std::f64::consts::PI;

    fn heat(n: usize) -> (Grid, DiscreteOperator) {
        let grid = Grid::new(1, n, 1.0).unwrap();
        let a = make_scenario(&Scenario::Heat {}, grid, 1.0, 0).unwrap();
        (grid, DiscreteOperator::assemble(&a, 0).unwrap())
    }

    #[test]
    fn zero_step_is_identity() {
        let (grid, op) = heat(16);
        for scheme in
            [Scheme::ExactExpm, Scheme::CrankNicolson { substeps: None }, Scheme::BackwardEuler { substeps: Some(3) }]
        {
            let s = Semigroup::new(op.clone(), scheme).unwrap();
            let u = fourier::mode(&grid, [3, 0]);
            assert_eq!(s.step(0.0, &u).unwrap(), u);
        }
    }

    #[test]
    fn crank_nicolson_mode_multiplier() {
        let (grid, op) = heat(16);
        let s = Semigroup::new(op, Scheme::CrankNicolson { substeps: Some(1) }).unwrap();
        let tau = 0.01;
        let h = grid.spacing();
        for k in [1usize, 5, 8] {
            let mu = 4.0 * (PI * k as f64 / 16.0).sin().powi(2) / (h * h);
            let factor = (1.0 - tau * mu / 2.0) / (1.0 + tau * mu / 2.0);
            let u = fourier::mode(&grid, [k, 0]);
            let v = s.step(tau, &u).unwrap();
            for (a, b) in v.iter().zip(&u) {
                assert!((a - b * factor).norm() < 1e-11);
            }
            let dense = s.dense(tau).unwrap();
            for (a, b) in matvec(&dense, &u).iter().zip(&u) {
                assert!((a - b * factor).norm() < 1e-11);
            }
        }
    }

    #[test]
    fn exact_matches_spectral_heat() {
        let (grid, op) = heat(32);
        let s = Semigroup::new(op, Scheme::ExactExpm).unwrap();
        let u: Vec<Complex64> = (0..32).map(|i| Complex64::new(if i < 10 { 1.0 } else { 0.0 }, 0.0)).collect();
        let a = s.step(0.003, &u).unwrap();
        let b = fourier::heat_evolve(&grid, &u, 0.003);
        let err = a.iter().zip(&b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
        assert!(err < 1e-12, "{err}");
    }

    #[test]
    fn crank_nicolson_is_second_order() {
        let (grid, op) = heat(32);
        let exact = Semigroup::new(op.clone(), Scheme::ExactExpm).unwrap();
        let u = fourier::mode(&grid, [2, 0]);
        let reference = exact.step(0.05, &u).unwrap();
        let err = |m: usize| {
            let s = Semigroup::new(op.clone(), Scheme::CrankNicolson { substeps: Some(m) }).unwrap();
            let v = s.step(0.05, &u).unwrap();
            v.iter().zip(&reference).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
        };
        let (e1, e2) = (err(64), err(128));
        let ratio = e1 / e2;
        assert!((3.6..4.4).contains(&ratio), "{e1} {e2} {ratio}");
    }

    #[test]
    fn every_scheme_contracts() {
        let grid = Grid::new(2, 8, 1.0).unwrap();
        let a = random_elliptic_staircase(grid, 1.0, 1, 0.5, 2.0, 7).unwrap();
        let op = DiscreteOperator::assemble(&a, 0).unwrap();
        let u: Vec<Complex64> =
            (0..64).map(|i| Complex64::new((i as f64 * 1.3).sin(), (i as f64 * 0.2).cos())).collect();
        for scheme in [
            Scheme::ExactExpm,
            Scheme::CrankNicolson { substeps: Some(2) },
            Scheme::BackwardEuler { substeps: Some(2) },
        ] {
            let s = Semigroup::new(op.clone(), scheme).unwrap();
            let v = s.step(0.02, &u).unwrap();
            assert!(norm(&grid, &v) <= norm(&grid, &u) * (1.0 + 1e-12));
        }
    }

    #[test]
    fn oversized_exact_is_refused() {
        let grid = Grid::new(2, 128, 1.0).unwrap();
        let a = make_scenario(&Scenario::Heat {}, grid, 1.0, 0).unwrap();
        let op = DiscreteOperator::assemble(&a, 0).unwrap();
        assert!(matches!(Semigroup::new(op, Scheme::ExactExpm), Err(Error::TooLarge { .. })));
        assert_eq!(Scheme::default_for(&grid), Scheme::CrankNicolson { substeps: None });
    }
}
