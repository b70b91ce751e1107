//! Periodic grids, fields, and the forward-difference gradient paired with
//! its exact negative adjoint.
//!
//! Cells are stored row-major (axis 0 is the slow index); cell `i` has its
//! center at `coords(i)·h`. Vector fields are stored component-major: all
//! cells of component 0, then all cells of component 1.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    dim: usize,
    points_per_axis: usize,
    period: f64,
}

impl Grid {
    pub fn new(dim: usize, points_per_axis: usize, period: f64) -> Result<Self> {
        if !(1..=2).contains(&dim) {
            return Err(Error::UnsupportedDimension(dim));
        }
        if points_per_axis < 4 {
            return Err(Error::InvalidGrid(format!("points_per_axis must be at least 4, got {points_per_axis}")));
        }
        if !(period.is_finite() && period > 0.0) {
            return Err(Error::InvalidGrid(format!("period must be positive, got {period}")));
        }
        Ok(Self { dim, points_per_axis, period })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn points_per_axis(&self) -> usize {
        self.points_per_axis
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn spacing(&self) -> f64 {
        self.period / self.points_per_axis as f64
    }

    pub fn cells(&self) -> usize {
        self.points_per_axis.pow(self.dim as u32)
    }

    /// `h^dim`, the weight of one cell in every integral.
    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.dim as i32)
    }

    /// Torus volume `ℓ^dim`.
    pub fn volume(&self) -> f64 {
        self.period.powi(self.dim as i32)
    }

    pub fn coords(&self, cell: usize) -> [usize; 2] {
        let n = self.points_per_axis;
        match self.dim {
            1 => [cell, 0],
            _ => [cell / n, cell % n],
        }
    }

    pub fn index(&self, coords: [usize; 2]) -> usize {
        let n = self.points_per_axis;
        match self.dim {
            1 => coords[0] % n,
            _ => (coords[0] % n) * n + coords[1] % n,
        }
    }

    /// Cell shifted by `offset` (a residue per axis, interpreted mod n).
    pub fn translate(&self, cell: usize, offset: [usize; 2]) -> usize {
        let c = self.coords(cell);
        self.index([c[0] + offset[0], c[1] + offset[1]])
    }

    /// Neighbour of `cell` one step forward (`+e_axis`) or backward.
    pub fn neighbor(&self, cell: usize, axis: usize, forward: bool) -> usize {
        let n = self.points_per_axis;
        let mut c = self.coords(cell);
        c[axis] = if forward { (c[axis] + 1) % n } else { (c[axis] + n - 1) % n };
        self.index(c)
    }

    pub fn center(&self, cell: usize) -> [f64; 2] {
        let h = self.spacing();
        let c = self.coords(cell);
        [c[0] as f64 * h, if self.dim == 2 { c[1] as f64 * h } else { 0.0 }]
    }

    /// Location where the coefficient of `cell` is sampled: the midpoint of
    /// its forward edges, `center + h/2` along every axis.
    pub fn site(&self, cell: usize) -> [f64; 2] {
        let h = self.spacing();
        let c = self.center(cell);
        [c[0] + 0.5 * h, if self.dim == 2 { c[1] + 0.5 * h } else { 0.0 }]
    }

    /// Length of the shortest representative of `d` modulo the period.
    pub fn wrap(&self, d: f64) -> f64 {
        let r = d.rem_euclid(self.period);
        r.min(self.period - r)
    }

    pub fn distance(&self, a: usize, b: usize) -> f64 {
        let ca = self.coords(a);
        let cb = self.coords(b);
        let n = self.points_per_axis;
        let h = self.spacing();
        (0..self.dim)
            .map(|j| {
                let r = (ca[j] + n - cb[j]) % n;
                let k = r.min(n - r) as f64 * h;
                k * k
            })
            .sum::<f64>()
            .sqrt()
    }

    /// Wrapped distance between two points of the torus.
    pub fn point_distance(&self, a: [f64; 2], b: [f64; 2]) -> f64 {
        (0..self.dim).map(|j| self.wrap(a[j] - b[j]).powi(2)).sum::<f64>().sqrt()
    }

    /// Offsets (residues per axis) of all cells at wrapped distance
    /// `< radius` from the origin cell. Always contains `[0, 0]`.
    pub fn ball_offsets(&self, radius: f64) -> Vec<[usize; 2]> {
        let n = self.points_per_axis;
        let h = self.spacing();
        let axis_dist = |r: usize| r.min(n - r) as f64 * h;
        let mut out = Vec::new();
        let second = if self.dim == 2 { n } else { 1 };
        for r0 in 0..n {
            let d0 = axis_dist(r0);
            if d0 >= radius && r0 != 0 {
                continue;
            }
            for r1 in 0..second {
                let d1 = if self.dim == 2 { axis_dist(r1) } else { 0.0 };
                if (d0 * d0 + d1 * d1).sqrt() < radius || (r0 == 0 && r1 == 0) {
                    out.push([r0, r1]);
                }
            }
        }
        out
    }

    /// Cells whose centers lie at wrapped distance `< radius` from the center
    /// of `center`, sorted. Never empty.
    pub fn parabolic_ball(&self, center: usize, radius: f64) -> Vec<usize> {
        let mut cells: Vec<usize> = self.ball_offsets(radius).into_iter().map(|o| self.translate(center, o)).collect();
        cells.sort_unstable();
        cells
    }

    /// Largest wrapped distance between two points of the torus.
    pub fn diameter(&self) -> f64 {
        0.5 * self.period * (self.dim as f64).sqrt()
    }
}

/// Complex scalar (`arity == 1`) or vector (`arity == dim`) field on a grid.
#[derive(Clone, Debug, PartialEq)]
pub struct SpaceField {
    grid: Grid,
    arity: usize,
    values: Vec<Complex64>,
}

impl SpaceField {
    pub fn new(grid: Grid, arity: usize, values: Vec<Complex64>) -> Result<Self> {
        if arity != 1 && arity != grid.dim() {
            return Err(Error::Shape(format!("arity {arity} on a {}-dimensional grid", grid.dim())));
        }
        if values.len() != arity * grid.cells() {
            return Err(Error::Shape(format!("expected {} values, got {}", arity * grid.cells(), values.len())));
        }
        if values.iter().any(|v| !(v.re.is_finite() && v.im.is_finite())) {
            return Err(Error::Shape("non-finite entry".into()));
        }
        Ok(Self { grid, arity, values })
    }

    pub fn scalar(grid: Grid, values: Vec<Complex64>) -> Result<Self> {
        Self::new(grid, 1, values)
    }

    pub fn zeros(grid: Grid, arity: usize) -> Self {
        Self { grid, arity, values: vec![Complex64::new(0.0, 0.0); arity * grid.cells()] }
    }

    pub fn constant(grid: Grid, c: Complex64) -> Self {
        Self { grid, arity: 1, values: vec![c; grid.cells()] }
    }

    /// Scalar field sampled at cell centers.
    pub fn from_fn(grid: Grid, f: impl Fn([f64; 2]) -> Complex64) -> Self {
        let values = (0..grid.cells()).map(|i| f(grid.center(i))).collect();
        Self { grid, arity: 1, values }
    }

    pub(crate) fn from_raw(grid: Grid, arity: usize, values: Vec<Complex64>) -> Self {
        debug_assert_eq!(values.len(), arity * grid.cells());
        Self { grid, arity, values }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn is_scalar(&self) -> bool {
        self.arity == 1
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    pub fn component(&self, c: usize) -> &[Complex64] {
        let n = self.grid.cells();
        &self.values[c * n..(c + 1) * n]
    }

    /// Pointwise `|F(x)|²` summed over components.
    pub fn pointwise_sq(&self) -> Vec<f64> {
        let n = self.grid.cells();
        let mut out = vec![0.0; n];
        for c in 0..self.arity {
            for (o, v) in out.iter_mut().zip(&self.values[c * n..(c + 1) * n]) {
                *o += v.norm_sqr();
            }
        }
        out
    }

    /// `⟨f, g⟩ = h^d Σ f·ḡ`.
    pub fn inner(&self, other: &SpaceField) -> Complex64 {
        debug_assert_eq!(self.values.len(), other.values.len());
        inner(&self.grid, &self.values, &other.values)
    }

    pub fn norm(&self) -> f64 {
        norm(&self.grid, &self.values)
    }

    pub fn mean(&self) -> Complex64 {
        let s: Complex64 = self.values.iter().sum();
        s / self.values.len() as f64
    }

    pub fn scaled(&self, c: Complex64) -> SpaceField {
        let values = self.values.iter().map(|v| v * c).collect();
        Self { grid: self.grid, arity: self.arity, values }
    }

    pub fn max_abs_diff(&self, other: &SpaceField) -> f64 {
        self.values.iter().zip(&other.values).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
    }
}

pub(crate) fn inner(grid: &Grid, a: &[Complex64], b: &[Complex64]) -> Complex64 {
    let s: Complex64 = a.iter().zip(b).map(|(x, y)| x * y.conj()).sum();
    s * grid.cell_volume()
}

pub(crate) fn norm(grid: &Grid, a: &[Complex64]) -> f64 {
    (a.iter().map(|x| x.norm_sqr()).sum::<f64>() * grid.cell_volume()).sqrt()
}

/// Forward differences with periodic wrap, written into a component-major
/// vector buffer of length `dim·cells`.
pub(crate) fn gradient_into(grid: &Grid, u: &[Complex64], out: &mut [Complex64]) {
    let n = grid.cells();
    let inv_h = 1.0 / grid.spacing();
    for axis in 0..grid.dim() {
        let dst = &mut out[axis * n..(axis + 1) * n];
        for (i, d) in dst.iter_mut().enumerate() {
            *d = (u[grid.neighbor(i, axis, true)] - u[i]) * inv_h;
        }
    }
}

/// Backward-difference divergence, the exact negative adjoint of
/// [`gradient_into`] for the `h^d`-weighted inner product.
pub(crate) fn divergence_into(grid: &Grid, f: &[Complex64], out: &mut [Complex64]) {
    let n = grid.cells();
    let inv_h = 1.0 / grid.spacing();
    out.iter_mut().for_each(|o| *o = Complex64::new(0.0, 0.0));
    for axis in 0..grid.dim() {
        let src = &f[axis * n..(axis + 1) * n];
        for (i, o) in out.iter_mut().enumerate() {
            *o += (src[i] - src[grid.neighbor(i, axis, false)]) * inv_h;
        }
    }
}

pub fn discrete_gradient(u: &SpaceField) -> Result<SpaceField> {
    if !u.is_scalar() {
        return Err(Error::Shape("gradient expects a scalar field".into()));
    }
    let g = u.grid;
    let mut out = vec![Complex64::new(0.0, 0.0); g.dim() * g.cells()];
    gradient_into(&g, &u.values, &mut out);
    Ok(SpaceField::from_raw(g, g.dim(), out))
}

pub fn discrete_divergence(f: &SpaceField) -> Result<SpaceField> {
    let g = f.grid;
    if f.arity != g.dim() {
        return Err(Error::Shape(format!("divergence expects arity {}, got {}", g.dim(), f.arity)));
    }
    let mut out = vec![Complex64::new(0.0, 0.0); g.cells()];
    divergence_into(&g, &f.values, &mut out);
    Ok(SpaceField::from_raw(g, 1, out))
}

/// Sampled solution `u(t,x)` with optional gradient samples.
#[derive(Clone, Debug)]
pub struct SpaceTimeField {
    grid: Grid,
    times: Vec<f64>,
    slices: Vec<SpaceField>,
    gradient_slices: Option<Vec<SpaceField>>,
}

impl SpaceTimeField {
    /// Times must be non-negative and strictly increasing; every slice lives
    /// on `grid` and all slices share one arity. Gradient slices, when given,
    /// have arity `dim`.
    pub fn new(
        grid: Grid,
        times: Vec<f64>,
        slices: Vec<SpaceField>,
        gradient_slices: Option<Vec<SpaceField>>,
    ) -> Result<Self> {
        if times.is_empty() || times.len() != slices.len() {
            return Err(Error::Shape(format!("{} times for {} slices", times.len(), slices.len())));
        }
        if times[0] < 0.0 || times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidTime("sample times must be non-negative and strictly increasing".into()));
        }
        let arity = slices[0].arity();
        if slices.iter().any(|s| s.grid != grid || s.arity() != arity) {
            return Err(Error::Shape("slices disagree on grid or arity".into()));
        }
        if let Some(g) = &gradient_slices {
            if g.len() != slices.len() || g.iter().any(|s| s.grid != grid || s.arity() != grid.dim()) {
                return Err(Error::Shape("gradient slices misaligned".into()));
            }
        }
        Ok(Self { grid, times, slices, gradient_slices })
    }

    /// Attaches discrete gradients of every (scalar) slice.
    pub fn with_gradients(mut self) -> Result<Self> {
        let grads = self.slices.iter().map(discrete_gradient).collect::<Result<Vec<_>>>()?;
        self.gradient_slices = Some(grads);
        Ok(self)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn slices(&self) -> &[SpaceField] {
        &self.slices
    }

    pub fn gradient_slices(&self) -> Option<&[SpaceField]> {
        self.gradient_slices.as_deref()
    }

    pub fn arity(&self) -> usize {
        self.slices[0].arity()
    }

    /// The gradient samples viewed as a space-time field of their own.
    pub fn gradient_field(&self) -> Result<SpaceTimeField> {
        let g = self.gradient_slices.clone().ok_or_else(|| Error::Shape("field carries no gradient slices".into()))?;
        SpaceTimeField::new(self.grid, self.times.clone(), g, None)
    }

    pub fn map_slices(&self, f: impl Fn(&SpaceField) -> SpaceField) -> SpaceTimeField {
        SpaceTimeField {
            grid: self.grid,
            times: self.times.clone(),
            slices: self.slices.iter().map(f).collect(),
            gradient_slices: None,
        }
    }
}
