//! Coefficient fields `A(t,x)`: piecewise constant in time, one `d×d`
//! complex matrix per cell (acting on that cell's bundle of forward edges).

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::grid::Grid;
use crate::quad::adaptive_simpson;
use crate::{Error, Result};

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };
const ONE: Complex64 = Complex64 { re: 1.0, im: 0.0 };

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EllipticityConstants {
    pub lambda: f64,
    #[serde(rename = "Lambda")]
    pub big_lambda: f64,
    /// Gaussian off-diagonal rate `λ / (4Λ²)`.
    pub alpha: f64,
    /// Reverse-Hölder exponent `2 + 4/dim`.
    pub rh_exponent: f64,
}

impl EllipticityConstants {
    pub fn new(lambda: f64, big_lambda: f64, dim: usize) -> Result<Self> {
        if !(lambda > 0.0) {
            return Err(Error::NotElliptic(format!("lower bound λ = {lambda} is not positive")));
        }
        if big_lambda < lambda {
            return Err(Error::NotElliptic(format!("Λ = {big_lambda} below λ = {lambda}")));
        }
        Ok(Self {
            lambda,
            big_lambda,
            alpha: lambda / (4.0 * big_lambda * big_lambda),
            rh_exponent: 2.0 + 4.0 / dim as f64,
        })
    }
}

/// Smallest eigenvalue of the Hermitian part of a `d×d` matrix (row-major).
pub fn hermitian_part_min_eig(m: &[Complex64], d: usize) -> f64 {
    match d {
        1 => m[0].re,
        _ => {
            let p = m[0].re;
            let r = m[3].re;
            let q = 0.5 * (m[1] + m[2].conj());
            0.5 * (p + r) - ((0.5 * (p - r)).powi(2) + q.norm_sqr()).sqrt()
        }
    }
}

/// Largest singular value of a `d×d` matrix (row-major).
pub fn operator_norm(m: &[Complex64], d: usize) -> f64 {
    match d {
        1 => m[0].norm(),
        _ => {
            // Eigenvalues of MᴴM = [[a, b], [b̄, c]].
            let a = m[0].norm_sqr() + m[2].norm_sqr();
            let c = m[1].norm_sqr() + m[3].norm_sqr();
            let b = m[0].conj() * m[1] + m[2].conj() * m[3];
            (0.5 * (a + c) + ((0.5 * (a - c)).powi(2) + b.norm_sqr()).sqrt()).sqrt()
        }
    }
}

/// Time-partitioned, cell-sampled coefficient field.
#[derive(Clone, Debug)]
pub struct CoefficientField {
    grid: Grid,
    breakpoints: Vec<f64>,
    pieces: Vec<Vec<Complex64>>,
    ellipticity: EllipticityConstants,
    bv: f64,
}

impl CoefficientField {
    /// `breakpoints` runs from `0` to the horizon `T`; piece `k` covers
    /// `[t_k, t_{k+1})` and holds `cells·d²` entries, one row-major `d×d`
    /// matrix per cell.
    pub fn new(grid: Grid, breakpoints: Vec<f64>, pieces: Vec<Vec<Complex64>>) -> Result<Self> {
        if breakpoints.len() < 2 || breakpoints[0] != 0.0 {
            return Err(Error::InvalidParameters("breakpoints must start at 0 and contain the horizon".into()));
        }
        if breakpoints.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidParameters("breakpoints must be strictly increasing".into()));
        }
        if pieces.len() + 1 != breakpoints.len() {
            return Err(Error::InvalidParameters(format!(
                "{} pieces for {} breakpoints",
                pieces.len(),
                breakpoints.len()
            )));
        }
        let d = grid.dim();
        let per_piece = grid.cells() * d * d;
        if pieces.iter().any(|p| p.len() != per_piece) {
            return Err(Error::Shape(format!("each piece needs {per_piece} entries")));
        }
        if pieces.iter().flatten().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(Error::InvalidParameters("non-finite coefficient entry".into()));
        }
        let ellipticity = measure_ellipticity(&grid, &pieces)?;
        let bv = bv_seminorm(&grid, &pieces);
        Ok(Self { grid, breakpoints, pieces, ellipticity, bv })
    }

    /// Autonomous field built from one piece.
    pub fn autonomous(grid: Grid, horizon: f64, piece: Vec<Complex64>) -> Result<Self> {
        Self::new(grid, vec![0.0, horizon], vec![piece])
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn horizon(&self) -> f64 {
        *self.breakpoints.last().unwrap()
    }

    pub fn piece_count(&self) -> usize {
        self.pieces.len()
    }

    pub fn piece(&self, k: usize) -> &[Complex64] {
        &self.pieces[k]
    }

    pub fn pieces(&self) -> &[Vec<Complex64>] {
        &self.pieces
    }

    pub fn matrix(&self, k: usize, cell: usize) -> &[Complex64] {
        let dd = self.grid.dim() * self.grid.dim();
        &self.pieces[k][cell * dd..(cell + 1) * dd]
    }

    pub fn ellipticity(&self) -> EllipticityConstants {
        self.ellipticity
    }

    /// `Σ_k sup_x ‖A_{k+1}(x) − A_k(x)‖`.
    pub fn bv(&self) -> f64 {
        self.bv
    }

    /// Piece active at time `t`; times past the horizon use the last piece.
    pub fn piece_index_at(&self, t: f64) -> usize {
        let k = self.breakpoints.partition_point(|&b| b <= t);
        k.saturating_sub(1).min(self.pieces.len() - 1)
    }

    pub fn is_real(&self) -> bool {
        self.pieces.iter().flatten().all(|z| z.im == 0.0)
    }

    /// Field `Ã(σ) = A(t_end − σ)*` on `[0, t_end]`, whose forward propagator
    /// from `0` to `t_end − s` is the adjoint `Γ(t_end, s)*`.
    pub fn time_reversed_adjoint(&self, t_end: f64) -> Result<Self> {
        if !(t_end > 0.0) {
            return Err(Error::InvalidTime(format!("reversal time {t_end} must be positive")));
        }
        let d = self.grid.dim();
        let last = self.pieces.len() - 1;
        let mut breaks = vec![0.0];
        let mut pieces = Vec::new();
        for k in (0..=last).rev() {
            let start = self.breakpoints[k];
            let end = if k == last { t_end } else { self.breakpoints[k + 1].min(t_end) };
            if end <= start {
                continue;
            }
            breaks.push(t_end - start);
            pieces.push(conj_transpose_piece(&self.pieces[k], d));
        }
        Self::new(self.grid, breaks, pieces)
    }
}

fn conj_transpose_piece(piece: &[Complex64], d: usize) -> Vec<Complex64> {
    let dd = d * d;
    let mut out = vec![ZERO; piece.len()];
    for (site, m) in piece.chunks(dd).enumerate() {
        for r in 0..d {
            for c in 0..d {
                out[site * dd + c * d + r] = m[r * d + c].conj();
            }
        }
    }
    out
}

fn measure_ellipticity(grid: &Grid, pieces: &[Vec<Complex64>]) -> Result<EllipticityConstants> {
    let d = grid.dim();
    let mut lo = f64::INFINITY;
    let mut hi: f64 = 0.0;
    for p in pieces {
        for m in p.chunks(d * d) {
            lo = lo.min(hermitian_part_min_eig(m, d));
            hi = hi.max(operator_norm(m, d));
        }
    }
    EllipticityConstants::new(lo, hi, d)
}

fn bv_seminorm(grid: &Grid, pieces: &[Vec<Complex64>]) -> f64 {
    let d = grid.dim();
    pieces
        .windows(2)
        .map(|w| {
            w[0].chunks(d * d)
                .zip(w[1].chunks(d * d))
                .map(|(a, b)| {
                    let diff: Vec<Complex64> = a.iter().zip(b).map(|(x, y)| y - x).collect();
                    operator_norm(&diff, d)
                })
                .fold(0.0, f64::max)
        })
        .sum()
}

/// Measured ellipticity constants of a field.
pub fn check_ellipticity(field: &CoefficientField) -> Result<EllipticityConstants> {
    measure_ellipticity(&field.grid, &field.pieces)
}

/// A coefficient field that can be evaluated at any time in `[0, T]`.
pub trait TimeCoefficients {
    fn grid(&self) -> Grid;
    fn horizon(&self) -> f64;
    /// All cell matrices at time `t`, laid out like a [`CoefficientField`] piece.
    fn eval(&self, t: f64) -> Vec<Complex64>;
    /// Interior times where `eval` jumps.
    fn discontinuities(&self) -> Vec<f64> {
        Vec::new()
    }
}

impl TimeCoefficients for CoefficientField {
    fn grid(&self) -> Grid {
        self.grid
    }
    fn horizon(&self) -> f64 {
        CoefficientField::horizon(self)
    }
    fn eval(&self, t: f64) -> Vec<Complex64> {
        self.pieces[self.piece_index_at(t)].clone()
    }
    fn discontinuities(&self) -> Vec<f64> {
        self.breakpoints[1..self.breakpoints.len() - 1].to_vec()
    }
}

/// Time-continuous coefficients given pointwise by `f(t, site) → d×d matrix`.
pub struct CoefficientFn<F> {
    grid: Grid,
    horizon: f64,
    f: F,
}

impl<F: Fn(f64, [f64; 2]) -> Vec<Complex64>> CoefficientFn<F> {
    pub fn new(grid: Grid, horizon: f64, f: F) -> Self {
        Self { grid, horizon, f }
    }
}

impl<F: Fn(f64, [f64; 2]) -> Vec<Complex64>> TimeCoefficients for CoefficientFn<F> {
    fn grid(&self) -> Grid {
        self.grid
    }
    fn horizon(&self) -> f64 {
        self.horizon
    }
    fn eval(&self, t: f64) -> Vec<Complex64> {
        (0..self.grid.cells()).flat_map(|i| (self.f)(t, self.grid.site(i))).collect()
    }
}

/// `Σ_i sup_x ‖A(t_{i+1},x) − A(t_i,x)‖` on the given partition; a lower
/// bound for the variation of a time-continuous field.
pub fn variation_on_partition(spec: &dyn TimeCoefficients, times: &[f64]) -> f64 {
    let samples: Vec<Vec<Complex64>> = times.iter().map(|&t| spec.eval(t)).collect();
    bv_seminorm(&spec.grid(), &samples)
}

/// Staircase `A_j` whose piece on `[m 2^{-j}, (m+1) 2^{-j})` (clipped to the
/// horizon) is the time average of `spec` over that interval.
pub fn time_average_refine(spec: &dyn TimeCoefficients, level: u32) -> Result<CoefficientField> {
    let horizon = spec.horizon();
    if !(horizon > 0.0) {
        return Err(Error::InvalidParameters("horizon must be positive".into()));
    }
    let step = 0.5f64.powi(level as i32);
    let mut breaks = vec![0.0];
    let mut m = 1u64;
    while (m as f64) * step < horizon * (1.0 - 1e-14) {
        breaks.push(m as f64 * step);
        m += 1;
    }
    breaks.push(horizon);
    let jumps = spec.discontinuities();
    let mut pieces = Vec::with_capacity(breaks.len() - 1);
    for w in breaks.windows(2) {
        let (a, b) = (w[0], w[1]);
        let mut cuts = vec![a];
        cuts.extend(jumps.iter().copied().filter(|&t| t > a && t < b));
        cuts.push(b);
        let mut acc: Option<Vec<Complex64>> = None;
        for c in cuts.windows(2) {
            // Evaluate strictly inside each sub-interval so staircase inputs
            // are read on the correct side of their jumps.
            let (lo, hi) = (c[0], c[1]);
            let inset = 1e-12 * (hi - lo);
            let f = |t: f64| spec.eval(t.clamp(lo + inset, hi - inset));
            let part = adaptive_simpson(&f, lo, hi, 1e-10 * (hi - lo))?;
            acc = Some(match acc {
                None => part,
                Some(prev) => prev.iter().zip(&part).map(|(x, y)| x + y).collect(),
            });
        }
        let inv = 1.0 / (b - a);
        pieces.push(acc.unwrap().into_iter().map(|z| z * inv).collect());
    }
    CoefficientField::new(spec.grid(), breaks, pieces)
}

/// Scenario library. Spatial patterns are defined in physical coordinates so
/// the same scenario can be sampled on successively refined grids.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "scenario", content = "params", rename_all = "snake_case", deny_unknown_fields)]
pub enum Scenario {
    /// `A ≡ I`.
    Heat {},
    /// Scalar `a(x) ∈ {lo, hi}` on a checkerboard of `blocks` tiles per axis.
    RealCheckerboard {
        lo: f64,
        hi: f64,
        #[serde(default = "default_blocks")]
        blocks: usize,
    },
    /// `I + ε·B(t,x)` with `‖B‖ ≤ 1` drawn per tile and per time piece.
    ComplexPerturb {
        epsilon: f64,
        #[serde(default = "default_blocks")]
        tiles: usize,
        #[serde(default = "default_one")]
        pieces: usize,
    },
    /// Scalar `1 + i·(imag + c_k)·s(x)` with `c_k` the running sum of
    /// `jumps`; breakpoints evenly spaced over the horizon.
    BvStaircase {
        jumps: Vec<f64>,
        #[serde(default = "default_imag")]
        imag: f64,
        #[serde(default = "default_blocks")]
        blocks: usize,
    },
    /// Scalar `1 + amplitude·sin(2π·frequency·t)·ψ(x) + i·imag·s(x)`,
    /// averaged onto the dyadic partition of the given level.
    TimeOscillating {
        amplitude: f64,
        frequency: f64,
        #[serde(default)]
        imag: f64,
        #[serde(default = "default_level")]
        level: u32,
        #[serde(default = "default_blocks")]
        blocks: usize,
    },
}

fn default_blocks() -> usize {
    8
}
fn default_one() -> usize {
    1
}
fn default_imag() -> f64 {
    0.5
}
fn default_level() -> u32 {
    4
}

impl Scenario {
    pub const NAMES: [&'static str; 5] =
        ["heat", "real_checkerboard", "complex_perturb", "bv_staircase", "time_oscillating"];

    pub fn name(&self) -> &'static str {
        match self {
            Scenario::Heat {} => "heat",
            Scenario::RealCheckerboard { .. } => "real_checkerboard",
            Scenario::ComplexPerturb { .. } => "complex_perturb",
            Scenario::BvStaircase { .. } => "bv_staircase",
            Scenario::TimeOscillating { .. } => "time_oscillating",
        }
    }
}

/// Parity of the checkerboard tile containing `x`.
fn checker_even(grid: &Grid, x: [f64; 2], blocks: usize) -> bool {
    let tile = |v: f64| ((v / grid.period() * blocks as f64).floor() as i64).rem_euclid(blocks as i64);
    let s = tile(x[0]) + if grid.dim() == 2 { tile(x[1]) } else { 0 };
    s % 2 == 0
}

fn tile_id(grid: &Grid, x: [f64; 2], tiles: usize) -> usize {
    let tile = |v: f64| ((v / grid.period() * tiles as f64).floor() as i64).rem_euclid(tiles as i64) as usize;
    if grid.dim() == 2 {
        tile(x[0]) * tiles + tile(x[1])
    } else {
        tile(x[0])
    }
}

/// Profile `ψ ∈ {1, ½}` with `sup ψ = 1`.
fn profile(grid: &Grid, x: [f64; 2], blocks: usize) -> f64 {
    if checker_even(grid, x, blocks) {
        1.0
    } else {
        0.5
    }
}

fn sign(grid: &Grid, x: [f64; 2], blocks: usize) -> f64 {
    if checker_even(grid, x, blocks) {
        1.0
    } else {
        -1.0
    }
}

fn scalar_piece(grid: &Grid, a: impl Fn([f64; 2]) -> Complex64) -> Vec<Complex64> {
    let d = grid.dim();
    let mut out = Vec::with_capacity(grid.cells() * d * d);
    for i in 0..grid.cells() {
        let v = a(grid.site(i));
        for r in 0..d {
            for c in 0..d {
                out.push(if r == c { v } else { ZERO });
            }
        }
    }
    out
}

fn even_breakpoints(horizon: f64, pieces: usize) -> Vec<f64> {
    (0..=pieces).map(|k| horizon * k as f64 / pieces as f64).collect()
}

/// Builds a scenario's coefficient field on `grid` over `[0, horizon]`.
/// Deterministic in `seed`.
pub fn make_scenario(scenario: &Scenario, grid: Grid, horizon: f64, seed: u64) -> Result<CoefficientField> {
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::InvalidParameters(format!("horizon {horizon} must be positive")));
    }
    let d = grid.dim();
    match scenario {
        Scenario::Heat {} => CoefficientField::autonomous(grid, horizon, scalar_piece(&grid, |_| ONE)),
        &Scenario::RealCheckerboard { lo, hi, blocks } => {
            if !(lo > 0.0 && hi > 0.0) || blocks == 0 {
                return Err(Error::InvalidParameters("checkerboard needs lo, hi > 0 and blocks ≥ 1".into()));
            }
            let piece =
                scalar_piece(&grid, |x| Complex64::new(if checker_even(&grid, x, blocks) { lo } else { hi }, 0.0));
            CoefficientField::autonomous(grid, horizon, piece)
        }
        &Scenario::ComplexPerturb { epsilon, tiles, pieces } => {
            if !(0.0..1.0).contains(&epsilon) {
                return Err(Error::InvalidParameters(format!(
                    "epsilon = {epsilon} must lie in [0, 1) to keep I + εB elliptic"
                )));
            }
            if tiles == 0 || pieces == 0 {
                return Err(Error::InvalidParameters("tiles and pieces must be positive".into()));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let ntiles = tiles.pow(d as u32);
            let mut out = Vec::with_capacity(pieces);
            for _ in 0..pieces {
                let perturbations: Vec<Vec<Complex64>> = (0..ntiles).map(|_| unit_ball_matrix(&mut rng, d)).collect();
                let mut piece = Vec::with_capacity(grid.cells() * d * d);
                for i in 0..grid.cells() {
                    let b = &perturbations[tile_id(&grid, grid.site(i), tiles)];
                    for r in 0..d {
                        for c in 0..d {
                            let id = if r == c { ONE } else { ZERO };
                            piece.push(id + b[r * d + c] * epsilon);
                        }
                    }
                }
                out.push(piece);
            }
            CoefficientField::new(grid, even_breakpoints(horizon, pieces), out)
        }
        Scenario::BvStaircase { jumps, imag, blocks } => {
            if jumps.iter().any(|j| !(*j >= 0.0)) {
                return Err(Error::InvalidParameters("jump sizes must be non-negative".into()));
            }
            let (imag, blocks) = (*imag, *blocks);
            let mut level = 0.0;
            let mut pieces = Vec::with_capacity(jumps.len() + 1);
            for k in 0..=jumps.len() {
                if k > 0 {
                    level += jumps[k - 1];
                }
                let c = level;
                pieces.push(scalar_piece(&grid, |x| Complex64::new(1.0, (imag + c) * sign(&grid, x, blocks))));
            }
            CoefficientField::new(grid, even_breakpoints(horizon, jumps.len() + 1), pieces)
        }
        &Scenario::TimeOscillating { amplitude, frequency, imag, level, blocks } => {
            if !(0.0..1.0).contains(&amplitude) {
                return Err(Error::InvalidParameters(format!("amplitude {amplitude} must lie in [0, 1)")));
            }
            let spec = oscillating_spec(grid, horizon, amplitude, frequency, imag, blocks);
            time_average_refine(&spec, level)
        }
    }
}

/// The time-continuous field behind the `time_oscillating` scenario.
pub fn oscillating_spec(
    grid: Grid,
    horizon: f64,
    amplitude: f64,
    frequency: f64,
    imag: f64,
    blocks: usize,
) -> CoefficientFn<impl Fn(f64, [f64; 2]) -> Vec<Complex64>> {
    let d = grid.dim();
    CoefficientFn::new(grid, horizon, move |t, x| {
        let a = Complex64::new(
            1.0 + amplitude * (2.0 * PI * frequency * t).sin() * profile(&grid, x, blocks),
            imag * sign(&grid, x, blocks),
        );
        let mut m = vec![ZERO; d * d];
        for r in 0..d {
            m[r * d + r] = a;
        }
        m
    })
}

fn unit_ball_matrix(rng: &mut ChaCha8Rng, d: usize) -> Vec<Complex64> {
    let m: Vec<Complex64> =
        (0..d * d).map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect();
    // Frobenius normalisation bounds the operator norm by one.
    let fro = m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt().max(1e-300);
    m.into_iter().map(|z| z / fro).collect()
}

/// Random complex cell matrix with `Re⟨Aξ,ξ⟩ ≥ λ|ξ|²` and `‖A‖ ≤ Λ`.
fn random_elliptic_matrix(rng: &mut ChaCha8Rng, d: usize, lambda: f64, big_lambda: f64) -> Vec<Complex64> {
    if d == 1 {
        let x: f64 = rng.random_range(lambda..=big_lambda);
        let ymax = (big_lambda * big_lambda - x * x).max(0.0).sqrt();
        let y: f64 = rng.random_range(-ymax..=ymax);
        return vec![Complex64::new(x, y)];
    }
    // λI + s·CCᴴ + i·S with S Hermitian: the Hermitian part is ≥ λI.
    let c: Vec<Complex64> =
        (0..4).map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect();
    let cch = [
        c[0] * c[0].conj() + c[1] * c[1].conj(),
        c[0] * c[2].conj() + c[1] * c[3].conj(),
        c[2] * c[0].conj() + c[3] * c[1].conj(),
        c[2] * c[2].conj() + c[3] * c[3].conj(),
    ];
    let q = Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
    let sh = [
        Complex64::new(rng.random_range(-1.0..1.0), 0.0),
        q,
        q.conj(),
        Complex64::new(rng.random_range(-1.0..1.0), 0.0),
    ];
    let i = Complex64::new(0.0, 1.0);
    let build = |s: f64| -> Vec<Complex64> {
        (0..4)
            .map(|k| {
                let id = if k == 0 || k == 3 { lambda } else { 0.0 };
                Complex64::new(id, 0.0) + cch[k] * s + i * sh[k] * s
            })
            .collect()
    };
    // Largest scale (by bisection) keeping the operator norm within Λ.
    let (mut lo, mut hi) = (0.0, 4.0 * big_lambda);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if operator_norm(&build(mid), 2) <= big_lambda {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    build(lo * rng.random_range(0.2..=1.0))
}

/// Staircase with `pieces` pieces of random cell matrices satisfying the
/// ellipticity bounds `(λ, Λ)`, on evenly spaced breakpoints.
pub fn random_elliptic_staircase(
    grid: Grid,
    horizon: f64,
    pieces: usize,
    lambda: f64,
    big_lambda: f64,
    seed: u64,
) -> Result<CoefficientField> {
    if !(0.0 < lambda && lambda <= big_lambda) || pieces == 0 {
        return Err(Error::InvalidParameters("need 0 < λ ≤ Λ and at least one piece".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = grid.dim();
    let out = (0..pieces)
        .map(|_| (0..grid.cells()).flat_map(|_| random_elliptic_matrix(&mut rng, d, lambda, big_lambda)).collect())
        .collect();
    CoefficientField::new(grid, even_breakpoints(horizon, pieces), out)
}
