use num_complex::Complex64;

use crate::{Error, Result};

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };
const RESTART: usize = 60;
const MAX_RESTARTS: usize = 200;

fn dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn norm(a: &[Complex64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

/// Restarted GMRES for `A x = b`, stopping at relative residual `tol`.
pub fn gmres(
    apply: impl Fn(&[Complex64]) -> Vec<Complex64>,
    b: &[Complex64],
    x0: Option<Vec<Complex64>>,
    tol: f64,
) -> Result<Vec<Complex64>> {
    let n = b.len();
    let bnorm = norm(b);
    let mut x = x0.unwrap_or_else(|| vec![ZERO; n]);
    if bnorm == 0.0 {
        return Ok(vec![ZERO; n]);
    }
    let target = tol * bnorm;
    let mut residual = f64::INFINITY;
    for _ in 0..MAX_RESTARTS {
        let ax = apply(&x);
        let r: Vec<Complex64> = b.iter().zip(&ax).map(|(b, a)| b - a).collect();
        let beta = norm(&r);
        residual = beta;
        if beta <= target {
            return Ok(x);
        }
        let mut basis: Vec<Vec<Complex64>> = vec![r.iter().map(|v| v / beta).collect()];
        let mut h = vec![vec![ZERO; RESTART]; RESTART + 1];
        let mut cs = vec![0.0; RESTART];
        let mut sn = vec![ZERO; RESTART];
        let mut g = vec![ZERO; RESTART + 1];
        g[0] = Complex64::new(beta, 0.0);
        let mut k = 0;
        for j in 0..RESTART {
            let mut w = apply(&basis[j]);
            // Modified Gram–Schmidt, repeated once for stability.
            for _ in 0..2 {
                for (i, v) in basis.iter().enumerate() {
                    let c = dot(v, &w);
                    h[i][j] += c;
                    w.iter_mut().zip(v).for_each(|(w, v)| *w -= c * v);
                }
            }
            let hnext = norm(&w);
            h[j + 1][j] = Complex64::new(hnext, 0.0);
            for i in 0..j {
                let (a, bb) = (h[i][j], h[i + 1][j]);
                h[i][j] = a * cs[i] + sn[i] * bb;
                h[i + 1][j] = -sn[i].conj() * a + bb * cs[i];
            }
            let (a, bb) = (h[j][j], h[j + 1][j]);
            let r = (a.norm_sqr() + bb.norm_sqr()).sqrt();
            if a.norm() == 0.0 {
                cs[j] = 0.0;
                sn[j] = Complex64::new(1.0, 0.0);
            } else {
                cs[j] = a.norm() / r;
                sn[j] = a / a.norm() * bb.conj() / r;
            }
            h[j][j] = a * cs[j] + sn[j] * bb;
            h[j + 1][j] = ZERO;
            g[j + 1] = -sn[j].conj() * g[j];
            g[j] *= cs[j];
            k = j + 1;
            if g[j + 1].norm() <= 0.5 * target || hnext <= 1e-300 {
                break;
            }
            basis.push(w.iter().map(|v| v / hnext).collect());
        }
        let mut y = vec![ZERO; k];
        for i in (0..k).rev() {
            let mut s = g[i];
            for l in i + 1..k {
                s -= h[i][l] * y[l];
            }
            y[i] = s / h[i][i];
        }
        for (yi, v) in y.iter().zip(&basis) {
            x.iter_mut().zip(v).for_each(|(x, v)| *x += yi * v);
        }
    }
    Err(Error::SolverDiverged { iterations: MAX_RESTARTS * RESTART, residual: residual / bnorm })
}
