use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::coeffs::CoefficientField;
use crate::grid::{self, Grid, SpaceField};
use crate::linalg::CMat;
use crate::{Error, Result, DENSE_CELL_LIMIT};

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };
const CERTIFICATE_PROBES: usize = 16;

/// `L = Gᴴ A G = −div(A∇·)` for one frozen coefficient piece.
#[derive(Clone, Debug)]
pub struct DiscreteOperator {
    grid: Grid,
    piece_index: usize,
    coeffs: Vec<Complex64>,
    accretivity_certificate: f64,
}

impl DiscreteOperator {
    pub fn assemble(field: &CoefficientField, k: usize) -> Result<Self> {
        if k >= field.piece_count() {
            return Err(Error::InvalidArgument(format!("piece {k} out of range (field has {})", field.piece_count())));
        }
        Self::from_piece(*field.grid(), k, field.piece(k).to_vec())
    }

    pub(crate) fn from_piece(grid: Grid, piece_index: usize, coeffs: Vec<Complex64>) -> Result<Self> {
        let mut op = Self { grid, piece_index, coeffs, accretivity_certificate: f64::NAN };
        op.accretivity_certificate = op.measure_certificate();
        if !(op.accretivity_certificate > 0.0) {
            return Err(Error::NotElliptic(format!(
                "accretivity certificate {} on piece {piece_index}",
                op.accretivity_certificate
            )));
        }
        Ok(op)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn piece_index(&self) -> usize {
        self.piece_index
    }

    /// Minimum of `Re⟨Lu,u⟩ / ‖∇u‖²` over seeded random probes.
    pub fn accretivity_certificate(&self) -> f64 {
        self.accretivity_certificate
    }

    fn measure_certificate(&self) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
        let n = self.grid.cells();
        let mut best = f64::INFINITY;
        for _ in 0..CERTIFICATE_PROBES {
            let u: Vec<Complex64> =
                (0..n).map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect();
            let lu = self.apply(&u);
            let mut gu = vec![ZERO; self.grid.dim() * n];
            grid::gradient_into(&self.grid, &u, &mut gu);
            let g2 = grid::norm(&self.grid, &gu).powi(2);
            if g2 > 0.0 {
                best = best.min(grid::inner(&self.grid, &lu, &u).re / g2);
            }
        }
        best
    }

    /// Cell matrix (row-major `d×d`) acting on the forward edges of `cell`.
    pub fn matrix(&self, cell: usize) -> &[Complex64] {
        let dd = self.grid.dim() * self.grid.dim();
        &self.coeffs[cell * dd..(cell + 1) * dd]
    }

    pub fn coefficients(&self) -> &[Complex64] {
        &self.coeffs
    }

    /// Multiplies a component-major vector field by the cell matrices.
    pub(crate) fn multiply_coefficients(&self, v: &[Complex64], out: &mut [Complex64]) {
        let d = self.grid.dim();
        let n = self.grid.cells();
        for i in 0..n {
            let m = self.matrix(i);
            for r in 0..d {
                let mut acc = ZERO;
                for c in 0..d {
                    acc += m[r * d + c] * v[c * n + i];
                }
                out[r * n + i] = acc;
            }
        }
    }

    /// `Lu = −div(A∇u)` on raw cell values.
    pub fn apply(&self, u: &[Complex64]) -> Vec<Complex64> {
        let n = self.grid.cells();
        let d = self.grid.dim();
        let mut g = vec![ZERO; d * n];
        grid::gradient_into(&self.grid, u, &mut g);
        let mut flux = vec![ZERO; d * n];
        self.multiply_coefficients(&g, &mut flux);
        let mut out = vec![ZERO; n];
        grid::divergence_into(&self.grid, &flux, &mut out);
        out.iter_mut().for_each(|v| *v = -*v);
        out
    }

    pub fn matvec(&self, u: &SpaceField) -> Result<SpaceField> {
        if !u.is_scalar() || *u.grid() != self.grid {
            return Err(Error::Shape("operator expects a scalar field on its grid".into()));
        }
        SpaceField::scalar(self.grid, self.apply(u.values()))
    }

    /// Operator assembled from the conjugate-transposed cell matrices.
    pub fn adjoint(&self) -> DiscreteOperator {
        let d = self.grid.dim();
        let dd = d * d;
        let mut coeffs = vec![ZERO; self.coeffs.len()];
        for (cell, m) in self.coeffs.chunks(dd).enumerate() {
            for r in 0..d {
                for c in 0..d {
                    coeffs[cell * dd + c * d + r] = m[r * d + c].conj();
                }
            }
        }
        DiscreteOperator {
            grid: self.grid,
            piece_index: self.piece_index,
            coeffs,
            accretivity_certificate: self.accretivity_certificate,
        }
    }

    /// Upper bound `‖G‖²·max‖A‖ = 4·dim·Λ/h²` for the operator norm.
    pub fn norm_bound(&self) -> f64 {
        let d = self.grid.dim();
        let h = self.grid.spacing();
        let big = self.coeffs.chunks(d * d).map(|m| crate::coeffs::operator_norm(m, d)).fold(0.0, f64::max);
        4.0 * d as f64 * big / (h * h)
    }

    pub fn dense(&self) -> Result<CMat> {
        let n = self.grid.cells();
        if n > DENSE_CELL_LIMIT {
            return Err(Error::TooLarge { cells: n, limit: DENSE_CELL_LIMIT });
        }
        let mut m = CMat::zeros((n, n));
        let mut e = vec![ZERO; n];
        for j in 0..n {
            e[j] = Complex64::new(1.0, 0.0);
            let col = self.apply(&e);
            for (i, v) in col.into_iter().enumerate() {
                m[[i, j]] = v;
            }
            e[j] = ZERO;
        }
        Ok(m)
    }

    /// Dense `L̂ = −G·div·A` acting on gradient-type fields. It intertwines
    /// with `L` through `G L = L̂ G`, hence `G e^{−τL} = e^{−τL̂} G`.
    pub fn gradient_space_dense(&self) -> Result<CMat> {
        let n = self.grid.cells();
        let d = self.grid.dim();
        if d * n > DENSE_CELL_LIMIT {
            return Err(Error::TooLarge { cells: d * n, limit: DENSE_CELL_LIMIT });
        }
        let mut m = CMat::zeros((d * n, d * n));
        let mut e = vec![ZERO; d * n];
        let mut flux = vec![ZERO; d * n];
        let mut div = vec![ZERO; n];
        let mut col = vec![ZERO; d * n];
        for j in 0..d * n {
            e[j] = Complex64::new(1.0, 0.0);
            self.multiply_coefficients(&e, &mut flux);
            grid::divergence_into(&self.grid, &flux, &mut div);
            grid::gradient_into(&self.grid, &div, &mut col);
            for (i, v) in col.iter().enumerate() {
                m[[i, j]] = -*v;
            }
            e[j] = ZERO;
        }
        Ok(m)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coeffs::{make_scenario, random_elliptic_staircase, Scenario};
    use crate::fourier;
    use crate::linalg::matvec;
    use std::f64::consts::PI;

    #[test]
    fn heat_eigenvalues_match_symbol() {
        let grid = Grid::new(1, 8, 1.0).unwrap();
        let a = make_scenario(&Scenario::Heat {}, grid, 1.0, 0).unwrap();
        let op = DiscreteOperator::assemble(&a, 0).unwrap();
        let h = grid.spacing();
        for k in 0..8 {
            let u = fourier::mode(&grid, [k, 0]);
            let lu = op.apply(&u);
            let mu = 4.0 * (PI * k as f64 / 8.0).sin().powi(2) / (h * h);
            for (a, b) in lu.iter().zip(&u) {
                assert!((a - b * mu).norm() < 1e-11 * mu.max(1.0));
            }
        }
    }

    #[test]
    fn constants_are_in_the_kernel() {
        for dim in [1, 2] {
            let grid = Grid::new(dim, 8, 1.0).unwrap();
            let a = random_elliptic_staircase(grid, 1.0, 2, 0.5, 2.0, 3).unwrap();
            for k in 0..2 {
                let op = DiscreteOperator::assemble(&a, k).unwrap();
                let r = op.apply(&vec![Complex64::new(2.5, -1.0); grid.cells()]);
                assert!(r.iter().all(|v| v.norm() <= 1e-14), "{r:?}");
                assert!(op.accretivity_certificate() >= 0.5 - 1e-10);
            }
        }
    }

    #[test]
    fn real_symmetric_is_hermitian() {
        let grid = Grid::new(2, 8, 1.0).unwrap();
        let a = make_scenario(&Scenario::RealCheckerboard { lo: 0.5, hi: 2.0, blocks: 4 }, grid, 1.0, 0).unwrap();
        let l = DiscreteOperator::assemble(&a, 0).unwrap().dense().unwrap();
        let diff = (&l - &crate::linalg::adjoint(&l)).iter().map(|z| z.norm()).fold(0.0, f64::max);
        assert!(diff <= 1e-13 * crate::linalg::norm1(&l));
    }

    #[test]
    fn adjoint_operator_is_the_adjoint() {
        let grid = Grid::new(2, 6, 1.0).unwrap();
        let a = random_elliptic_staircase(grid, 1.0, 1, 0.5, 2.0, 11).unwrap();
        let op = DiscreteOperator::assemble(&a, 0).unwrap();
        let l = op.dense().unwrap();
        let lh = op.adjoint().dense().unwrap();
        let diff = (&lh - &crate::linalg::adjoint(&l)).iter().map(|z| z.norm()).fold(0.0, f64::max);
        assert!(diff <= 1e-12 * crate::linalg::norm1(&l));
        assert!(crate::linalg::norm1(&l) <= op.norm_bound() * 2.0 + 1e-9);
    }

    #[test]
    fn gradient_space_operator_intertwines() {
        let grid = Grid::new(2, 6, 1.0).unwrap();
        let a = random_elliptic_staircase(grid, 1.0, 1, 0.5, 2.0, 5).unwrap();
        let op = DiscreteOperator::assemble(&a, 0).unwrap();
        let lhat = op.gradient_space_dense().unwrap();
        let u: Vec<Complex64> = (0..36).map(|i| Complex64::new((i as f64 * 0.37).sin(), (i as f64).cos())).collect();
        let mut gu = vec![ZERO; 72];
        grid::gradient_into(&grid, &u, &mut gu);
        let lhs = matvec(&lhat, &gu);
        let mut rhs = vec![ZERO; 72];
        grid::gradient_into(&grid, &op.apply(&u), &mut rhs);
        for (x, y) in lhs.iter().zip(&rhs) {
            assert!((x - y).norm() < 1e-9);
        }
    }
}
