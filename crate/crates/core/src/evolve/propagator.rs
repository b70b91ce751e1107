use num_complex::Complex64;

use super::operator::DiscreteOperator;
use super::semigroup::{Scheme, Semigroup};
use crate::coeffs::CoefficientField;
use crate::grid::{Grid, SpaceField};
use crate::linalg::{adjoint, identity, CMat};
use crate::{Error, Result};

/// One frozen-coefficient factor `e^{−τ L_piece}` of an evaluation path.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Factor {
    pub piece: usize,
    pub tau: f64,
}

/// `Γ(t,s)` for a staircase field: the ordered product of the frozen
/// semigroups over the pieces met between `s` and `t`. The last piece
/// extends past the horizon.
#[derive(Debug)]
pub struct Propagator {
    field: CoefficientField,
    scheme: Scheme,
    semigroups: Vec<Semigroup>,
}

impl Propagator {
    pub fn build(field: CoefficientField, scheme: Scheme) -> Result<Self> {
        let semigroups = (0..field.piece_count())
            .map(|k| Semigroup::new(DiscreteOperator::assemble(&field, k)?, scheme))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { field, scheme, semigroups })
    }

    pub fn field(&self) -> &CoefficientField {
        &self.field
    }

    pub fn grid(&self) -> &Grid {
        self.field.grid()
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    pub fn semigroup(&self, k: usize) -> &Semigroup {
        &self.semigroups[k]
    }

    pub fn operator(&self, k: usize) -> &DiscreteOperator {
        self.semigroups[k].operator()
    }

    /// Factors of `Γ(t,s)` in application order (earliest first).
    pub fn factors(&self, t: f64, s: f64) -> Result<Vec<Factor>> {
        if !(s >= 0.0 && t >= s && t.is_finite()) {
            return Err(Error::InvalidTime(format!("need 0 ≤ s ≤ t, got s = {s}, t = {t}")));
        }
        let b = self.field.breakpoints();
        let last = self.field.piece_count() - 1;
        let mut out = Vec::new();
        for k in 0..=last {
            let lo = s.max(b[k]);
            let hi = if k == last { t } else { t.min(b[k + 1]) };
            if hi > lo {
                out.push(Factor { piece: k, tau: hi - lo });
            }
        }
        Ok(out)
    }

    pub fn apply_values(&self, t: f64, s: f64, f: &[Complex64]) -> Result<Vec<Complex64>> {
        self.check_len(f)?;
        let mut v = f.to_vec();
        for Factor { piece, tau } in self.factors(t, s)? {
            v = self.semigroups[piece].step(tau, &v)?;
        }
        Ok(v)
    }

    pub fn apply(&self, t: f64, s: f64, f: &SpaceField) -> Result<SpaceField> {
        self.check_field(f)?;
        SpaceField::scalar(*self.grid(), self.apply_values(t, s, f.values())?)
    }

    /// `Γ(t,s)*`: conjugate transposes of the factors in reverse order.
    pub fn adjoint_apply_values(&self, t: f64, s: f64, h: &[Complex64]) -> Result<Vec<Complex64>> {
        self.check_len(h)?;
        let mut v = h.to_vec();
        for Factor { piece, tau } in self.factors(t, s)?.into_iter().rev() {
            v = self.semigroups[piece].step_adjoint(tau, &v)?;
        }
        Ok(v)
    }

    pub fn adjoint_apply(&self, t: f64, s: f64, h: &SpaceField) -> Result<SpaceField> {
        self.check_field(h)?;
        SpaceField::scalar(*self.grid(), self.adjoint_apply_values(t, s, h.values())?)
    }

    /// `Γ(t,s)*h` computed as the forward propagator of the time-reversed
    /// field `σ ↦ A(t − σ)*` from `0` to `t − s`.
    pub fn adjoint_via_time_reversal(&self, t: f64, s: f64, h: &SpaceField) -> Result<SpaceField> {
        self.check_field(h)?;
        if t == s {
            return Ok(h.clone());
        }
        self.factors(t, s)?;
        let reversed = Propagator::build(self.field.time_reversed_adjoint(t)?, self.scheme)?;
        reversed.apply(t - s, 0.0, h)
    }

    /// Dense matrix of `Γ(t,s)`.
    pub fn dense(&self, t: f64, s: f64) -> Result<CMat> {
        let mut m: Option<CMat> = None;
        for Factor { piece, tau } in self.factors(t, s)? {
            let e = self.semigroups[piece].dense(tau)?;
            m = Some(match m {
                None => (*e).clone(),
                Some(acc) => e.dot(&acc),
            });
        }
        Ok(m.unwrap_or_else(|| identity(self.grid().cells())))
    }

    pub fn dense_adjoint(&self, t: f64, s: f64) -> Result<CMat> {
        Ok(adjoint(&self.dense(t, s)?))
    }

    /// `k(t,s,·,y)`: the propagator applied to the discrete delta of mass one
    /// at `source_cell`.
    pub fn kernel_column(&self, t: f64, s: f64, source_cell: usize) -> Result<SpaceField> {
        if !(t > s) {
            return Err(Error::InvalidTime(format!("kernel needs t > s, got t = {t}, s = {s}")));
        }
        let grid = *self.grid();
        if source_cell >= grid.cells() {
            return Err(Error::InvalidArgument(format!("source cell {source_cell} out of range")));
        }
        let mut delta = vec![Complex64::new(0.0, 0.0); grid.cells()];
        delta[source_cell] = Complex64::new(1.0 / grid.cell_volume(), 0.0);
        SpaceField::scalar(grid, self.apply_values(t, s, &delta)?)
    }

    fn check_len(&self, f: &[Complex64]) -> Result<()> {
        if f.len() != self.grid().cells() {
            return Err(Error::Shape(format!("expected {} values, got {}", self.grid().cells(), f.len())));
        }
        Ok(())
    }

    fn check_field(&self, f: &SpaceField) -> Result<()> {
        if !f.is_scalar() || f.grid() != self.grid() {
            return Err(Error::Shape("propagator expects a scalar field on its grid".into()));
        }
        Ok(())
    }
}
