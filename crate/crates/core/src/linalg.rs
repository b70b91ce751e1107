//! Dense complex linear algebra used by the exact propagator and the checks.
//!
//! The matrix exponential uses scaling and squaring with diagonal Padé
//! approximants of degree 3–13 (Higham 2005 θ thresholds). The φ-functions
//! needed by the maximal-regularity operators come from the exponential of an
//! augmented block matrix, which never forms `L⁻¹`.

use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2};
use num_complex::Complex64;

pub type CMat = Array2<Complex64>;

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };
const ONE: Complex64 = Complex64 { re: 1.0, im: 0.0 };

pub fn identity(n: usize) -> CMat {
    Array2::from_diag_elem(n, ONE)
}

/// Maximum absolute column sum.
pub fn norm1(a: &CMat) -> f64 {
    a.columns().into_iter().map(|c| c.iter().map(|z| z.norm()).sum::<f64>()).fold(0.0, f64::max)
}

/// Maximum absolute row sum.
pub fn norm_inf(a: &CMat) -> f64 {
    a.rows().into_iter().map(|r| r.iter().map(|z| z.norm()).sum::<f64>()).fold(0.0, f64::max)
}

pub fn matvec(a: &CMat, x: &[Complex64]) -> Vec<Complex64> {
    a.dot(&ArrayView1::from(x)).into_raw_vec_and_offset().0
}

pub fn adjoint(a: &CMat) -> CMat {
    a.t().mapv(|z| z.conj())
}

#[allow(clippy::excessive_precision)]
const THETA: [(usize, f64); 4] =
    [(3, 1.495585217958292e-2), (5, 2.539398330063230e-1), (7, 9.504178996162932e-1), (9, 2.097847961257068e0)];
const THETA_13: f64 = 5.371920351148152e0;

fn pade_coefficients(m: usize) -> &'static [f64] {
    match m {
        3 => &[120.0, 60.0, 12.0, 1.0],
        5 => &[30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0],
        7 => &[17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0],
        9 => &[
            17643225600.0,
            8821612800.0,
            2075673600.0,
            302702400.0,
            30270240.0,
            2162160.0,
            110880.0,
            3960.0,
            90.0,
            1.0,
        ],
        _ => &[
            64764752532480000.0,
            32382376266240000.0,
            7771770303897600.0,
            1187353796428800.0,
            129060195264000.0,
            10559470521600.0,
            670442572800.0,
            33522128640.0,
            1323241920.0,
            40840800.0,
            960960.0,
            16380.0,
            182.0,
            1.0,
        ],
    }
}

fn scaled_sum(terms: &[(&CMat, f64)], n: usize) -> CMat {
    let mut out = Array2::zeros((n, n));
    for (m, c) in terms {
        out.scaled_add(Complex64::new(*c, 0.0), *m);
    }
    out
}

/// `exp(A)` by scaling and squaring.
pub fn expm(a: &CMat) -> CMat {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "expm requires a square matrix");
    if n == 0 {
        return Array2::zeros((0, 0));
    }
    let nrm = norm1(a);
    let eye = identity(n);
    for &(m, theta) in &THETA {
        if nrm <= theta {
            return pade_low(a, m, &eye);
        }
    }
    let squarings = if nrm > THETA_13 { (nrm / THETA_13).log2().ceil().max(0.0) as i32 } else { 0 };
    let scaled = a.mapv(|z| z / 2f64.powi(squarings));
    let mut r = pade13(&scaled, &eye);
    for _ in 0..squarings {
        r = r.dot(&r);
    }
    r
}

fn pade_low(a: &CMat, m: usize, eye: &CMat) -> CMat {
    let n = a.nrows();
    let b = pade_coefficients(m);
    let a2 = a.dot(a);
    let mut powers = vec![eye.clone(), a2];
    for k in 2..=m / 2 {
        let next = powers[k - 1].dot(&powers[1]);
        powers.push(next);
    }
    let mut u_inner: CMat = Array2::zeros((n, n));
    let mut v: CMat = Array2::zeros((n, n));
    for (k, p) in powers.iter().enumerate() {
        u_inner.scaled_add(Complex64::new(b[2 * k + 1], 0.0), p);
        v.scaled_add(Complex64::new(b[2 * k], 0.0), p);
    }
    let u = a.dot(&u_inner);
    solve(&(&v - &u), &(&v + &u))
}

fn pade13(a: &CMat, eye: &CMat) -> CMat {
    let n = a.nrows();
    let b = pade_coefficients(13);
    let a2 = a.dot(a);
    let a4 = a2.dot(&a2);
    let a6 = a4.dot(&a2);
    let inner_u = scaled_sum(&[(&a6, b[13]), (&a4, b[11]), (&a2, b[9])], n);
    let mut u = a6.dot(&inner_u);
    u.scaled_add(Complex64::new(b[7], 0.0), &a6);
    u.scaled_add(Complex64::new(b[5], 0.0), &a4);
    u.scaled_add(Complex64::new(b[3], 0.0), &a2);
    u.scaled_add(Complex64::new(b[1], 0.0), eye);
    let u = a.dot(&u);
    let inner_v = scaled_sum(&[(&a6, b[12]), (&a4, b[10]), (&a2, b[8])], n);
    let mut v = a6.dot(&inner_v);
    v.scaled_add(Complex64::new(b[6], 0.0), &a6);
    v.scaled_add(Complex64::new(b[4], 0.0), &a4);
    v.scaled_add(Complex64::new(b[2], 0.0), &a2);
    v.scaled_add(Complex64::new(b[0], 0.0), eye);
    solve(&(&v - &u), &(&v + &u))
}

/// Solves `A X = B` by LU with partial pivoting.
pub fn solve(a: &CMat, b: &CMat) -> CMat {
    let n = a.nrows();
    let mut lu = a.as_standard_layout().into_owned();
    let mut x = b.as_standard_layout().into_owned();
    let m = x.ncols();
    let lu_s = lu.as_slice_mut().expect("standard layout");
    let x_s = x.as_slice_mut().expect("standard layout");
    for k in 0..n {
        let (piv, _) =
            (k..n).map(|i| (i, lu_s[i * n + k].norm())).fold((k, -1.0), |acc, v| if v.1 > acc.1 { v } else { acc });
        if piv != k {
            for j in 0..n {
                lu_s.swap(k * n + j, piv * n + j);
            }
            for j in 0..m {
                x_s.swap(k * m + j, piv * m + j);
            }
        }
        let pivot = lu_s[k * n + k];
        if pivot.norm() == 0.0 {
            continue;
        }
        let (head, tail) = lu_s.split_at_mut((k + 1) * n);
        let row_k = &head[k * n..(k + 1) * n];
        for i in 0..n - k - 1 {
            let row = &mut tail[i * n..(i + 1) * n];
            let l = row[k] / pivot;
            row[k] = l;
            if l != ZERO {
                for j in k + 1..n {
                    row[j] -= l * row_k[j];
                }
            }
        }
    }
    // Forward substitution with the unit lower factor.
    for i in 0..n {
        let (done, rest) = x_s.split_at_mut(i * m);
        let row_i = &mut rest[..m];
        for k in 0..i {
            let l = lu_s[i * n + k];
            if l != ZERO {
                let row_k = &done[k * m..(k + 1) * m];
                for j in 0..m {
                    row_i[j] -= l * row_k[j];
                }
            }
        }
    }
    for i in (0..n).rev() {
        let (head, rest) = x_s.split_at_mut((i + 1) * m);
        let row_i = &mut head[i * m..];
        for k in i + 1..n {
            let u = lu_s[i * n + k];
            if u != ZERO {
                let row_k = &rest[(k - i - 1) * m..(k - i) * m];
                for j in 0..m {
                    row_i[j] -= u * row_k[j];
                }
            }
        }
        let d = lu_s[i * n + i];
        for v in row_i.iter_mut() {
            *v /= d;
        }
    }
    x
}

/// `(e^X, φ₁(X), φ₂(X))` with `φ₁(z) = (e^z − 1)/z` and
/// `φ₂(z) = (e^z − 1 − z)/z²`, read off the exponential of
/// `[[X, I, 0], [0, 0, I], [0, 0, 0]]`.
pub fn phi_functions(x: &CMat) -> (CMat, CMat, CMat) {
    let n = x.nrows();
    let mut aug: CMat = Array2::zeros((3 * n, 3 * n));
    aug.slice_mut(s![0..n, 0..n]).assign(x);
    for i in 0..n {
        aug[[i, n + i]] = ONE;
        aug[[n + i, 2 * n + i]] = ONE;
    }
    let e = expm(&aug);
    (
        e.slice(s![0..n, 0..n]).to_owned(),
        e.slice(s![0..n, n..2 * n]).to_owned(),
        e.slice(s![0..n, 2 * n..3 * n]).to_owned(),
    )
}

/// Largest singular value (dense SVD).
pub fn max_singular_value(a: ArrayView2<Complex64>) -> f64 {
    let (r, c) = a.dim();
    if r == 0 || c == 0 {
        return 0.0;
    }
    let m = nalgebra::DMatrix::from_fn(r, c, |i, j| a[[i, j]]);
    m.singular_values().iter().cloned().fold(0.0, f64::max)
}

/// Lower estimate of `‖A‖_{ℓᵖ→ℓᵖ}` for `p ∈ [1, ∞]` (unweighted). Exact for
/// `p ∈ {1, ∞}` and `p = 2`; otherwise Boyd's nonlinear power iteration from
/// several deterministic starts.
pub fn p_norm_estimate(a: &CMat, p: f64) -> f64 {
    assert!(p >= 1.0, "p must be at least 1");
    if p == 1.0 {
        return norm1(a);
    }
    if p.is_infinite() {
        return norm_inf(a);
    }
    if p == 2.0 {
        return max_singular_value(a.view());
    }
    let n = a.ncols();
    let q = p / (p - 1.0);
    let ah = adjoint(a);
    let mut starts: Vec<Array1<Complex64>> = vec![Array1::from_elem(n, ONE)];
    // Columns with the largest ℓᵖ norms are good starting points.
    let mut cols: Vec<(usize, f64)> = (0..n).map(|j| (j, lp(a.column(j), p))).collect();
    cols.sort_by(|x, y| y.1.total_cmp(&x.1));
    for &(j, _) in cols.iter().take(4) {
        let mut e = Array1::from_elem(n, ZERO);
        e[j] = ONE;
        starts.push(e);
    }
    // A deterministic oscillating start.
    starts.push(Array1::from_shape_fn(n, |i| Complex64::from_polar(1.0, 0.7 * i as f64 * i as f64)));
    let mut best = cols.first().map(|c| c.1).unwrap_or(0.0);
    for x0 in starts {
        let mut x = normalize_p(x0, p);
        let mut prev = 0.0;
        for _ in 0..200 {
            let y = a.dot(&x);
            let val = lp(y.view(), p);
            best = best.max(val);
            if val <= prev * (1.0 + 1e-12) {
                break;
            }
            prev = val;
            let z = ah.dot(&dual(&y, p));
            if z.iter().all(|v| v.norm() == 0.0) {
                break;
            }
            x = normalize_p(dual(&z, q), p);
        }
    }
    best
}

fn lp(x: ArrayView1<Complex64>, p: f64) -> f64 {
    x.iter().map(|v| v.norm().powf(p)).sum::<f64>().powf(1.0 / p)
}

fn normalize_p(x: Array1<Complex64>, p: f64) -> Array1<Complex64> {
    let n = lp(x.view(), p);
    if n == 0.0 {
        x
    } else {
        x.mapv(|v| v / n)
    }
}

/// The duality map `y ↦ |y|^{p−1} sgn(y)`.
fn dual(y: &Array1<Complex64>, p: f64) -> Array1<Complex64> {
    y.mapv(|v| {
        let r = v.norm();
        if r == 0.0 {
            ZERO
        } else {
            v / r * r.powf(p - 1.0)
        }
    })
}
