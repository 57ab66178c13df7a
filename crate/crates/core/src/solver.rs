//! Restarted GMRES for real linear systems given only as a matrix-vector product.

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug)]
pub struct GmresOptions {
    /// Krylov dimension per cycle.
    pub restart: usize,
    /// Total number of operator applications.
    pub max_iter: usize,
    /// Target for the residual 2-norm `‖b - A x‖`.
    pub tol: f64,
}

impl Default for GmresOptions {
    fn default() -> Self {
        GmresOptions { restart: 30, max_iter: 1000, tol: 1e-10 }
    }
}

#[derive(Clone, Debug)]
pub struct GmresReport {
    pub iterations: usize,
    pub residual: f64,
    /// Residual estimate after every operator application.
    pub history: Vec<f64>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    y.iter_mut().zip(x).for_each(|(yi, xi)| *yi += alpha * xi);
}

/// Solves `A x = b` starting from the given `x`. Returns `NoConvergence` when
/// the budget runs out; `x` then holds the best iterate found.
pub fn gmres<F>(mut apply: F, b: &[f64], x: &mut [f64], opts: &GmresOptions) -> Result<GmresReport>
where
    F: FnMut(&[f64], &mut [f64]),
{
    let n = b.len();
    let m = opts.restart.max(1);
    let mut w = vec![0.0; n];
    let mut history = Vec::new();
    let mut iterations = 0;
    loop {
        // true residual at the start of each cycle
        apply(x, &mut w);
        let mut r: Vec<f64> = b.iter().zip(&w).map(|(bi, wi)| bi - wi).collect();
        let beta = norm(&r);
        log::debug!("gmres: {iterations} products, residual {beta:.3e}");
        if beta <= opts.tol {
            return Ok(GmresReport { iterations, residual: beta, history });
        }
        if iterations >= opts.max_iter {
            return Err(Error::NoConvergence(format!("GMRES residual {beta:.3e} after {iterations} products")));
        }
        r.iter_mut().for_each(|v| *v /= beta);
        let mut basis: Vec<Vec<f64>> = vec![r];
        let mut hess = vec![vec![0.0; m]; m + 1];
        let (mut cs, mut sn) = (vec![0.0; m], vec![0.0; m]);
        let mut g = vec![0.0; m + 1];
        g[0] = beta;
        let mut k = 0;
        while k < m && iterations < opts.max_iter {
            apply(&basis[k], &mut w);
            iterations += 1;
            for (j, v) in basis.iter().enumerate() {
                let h = dot(&w, v);
                hess[j][k] = h;
                axpy(-h, v, &mut w);
            }
            let hn = norm(&w);
            hess[k + 1][k] = hn;
            for j in 0..k {
                let (a, c) = (hess[j][k], hess[j + 1][k]);
                hess[j][k] = cs[j] * a + sn[j] * c;
                hess[j + 1][k] = -sn[j] * a + cs[j] * c;
            }
            let (a, c) = (hess[k][k], hess[k + 1][k]);
            let den = a.hypot(c);
            cs[k] = if den == 0.0 { 1.0 } else { a / den };
            sn[k] = if den == 0.0 { 0.0 } else { c / den };
            hess[k][k] = den;
            hess[k + 1][k] = 0.0;
            g[k + 1] = -sn[k] * g[k];
            g[k] *= cs[k];
            history.push(g[k + 1].abs());
            k += 1;
            if g[k].abs() <= opts.tol || hn <= f64::EPSILON * beta {
                break;
            }
            basis.push(w.iter().map(|v| v / hn).collect());
        }
        // back substitution for the k coefficients
        let mut y = vec![0.0; k];
        for i in (0..k).rev() {
            let mut s = g[i];
            for j in i + 1..k {
                s -= hess[i][j] * y[j];
            }
            y[i] = if hess[i][i] == 0.0 { 0.0 } else { s / hess[i][i] };
        }
        for (yi, v) in y.iter().zip(&basis) {
            axpy(*yi, v, x);
        }
    }
}
