//! Single-ancilla dilation of a local Lindblad term and channel distances.
//!
//! The ancilla is the most significant qubit of every gadget operator, so the
//! `|0>_anc` input columns are the first half of the columns.

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix, C64, ONE, ZERO};
use crate::spectral;
use crate::state::LindbladBlock;

/// `O = [[√τ G, L†], [L, √τ G]]`.
pub fn dilation_operator(l: &Matrix, g: &Matrix, tau: f64) -> Result<Matrix> {
    let d = l.nrows();
    if l.dim() != (d, d) || g.dim() != (d, d) {
        return Err(Error::Shape(format!("L {:?} and G {:?} must be square and equal", l.dim(), g.dim())));
    }
    if tau < 0.0 {
        return Err(Error::InvalidParameter(format!("τ must be nonnegative, got {tau}")));
    }
    let dev = linalg::hermitian_deviation(g);
    if dev > 1e-12 * linalg::max_abs(g).max(1.0) {
        return Err(Error::NotHermitian(dev));
    }
    let s = tau.sqrt();
    let ld = linalg::dagger(l);
    Ok(Matrix::from_shape_fn((2 * d, 2 * d), |(i, j)| match (i < d, j < d) {
        (true, true) => g[[i, j]] * s,
        (true, false) => ld[[i, j - d]],
        (false, true) => l[[i - d, j]],
        (false, false) => g[[i - d, j - d]] * s,
    }))
}

/// `U = exp(-i O √τ)` through the eigendecomposition of `O`.
pub fn gadget_unitary(l: &Matrix, g: &Matrix, tau: f64) -> Result<Matrix> {
    let o = dilation_operator(l, g, tau)?;
    let dec = spectral::eig_hermitian(&linalg::hermitize(&o))?;
    let s = tau.sqrt();
    Ok(dec.function(|x| C64::new(0.0, -x * s).exp()))
}

/// A channel in Kraus form on the system support.
#[derive(Clone, Debug)]
pub struct LocalChannel {
    pub kraus: Vec<Matrix>,
}

impl LocalChannel {
    pub fn dim(&self) -> usize {
        self.kraus[0].nrows()
    }

    /// `‖Σ K†K - I‖_max`.
    pub fn completeness_error(&self) -> f64 {
        let d = self.dim();
        let mut s = Matrix::zeros((d, d));
        for k in &self.kraus {
            s += &linalg::dagger(k).dot(k);
        }
        linalg::max_abs(&(s - linalg::identity(d)))
    }

    /// Row-major superoperator `Σ K ⊗ K̄`.
    pub fn superop(&self) -> Matrix {
        let d = self.dim();
        let mut s = Matrix::zeros((d * d, d * d));
        for k in &self.kraus {
            s += &linalg::kron(k, &k.mapv(|z| z.conj()));
        }
        s
    }

    pub fn apply(&self, rho: &Matrix) -> Matrix {
        let mut out = Matrix::zeros(rho.dim());
        for k in &self.kraus {
            out += &k.dot(rho).dot(&linalg::dagger(k));
        }
        out
    }
}

/// Kraus operators `K₀ = <0|U|0>`, `K₁ = <1|U|0>` of a gadget unitary.
pub fn channel_from_unitary(u: &Matrix) -> Result<LocalChannel> {
    let dd = u.nrows();
    if u.dim() != (dd, dd) || dd % 2 != 0 {
        return Err(Error::Shape(format!("{:?} is not a gadget unitary", u.dim())));
    }
    let d = dd / 2;
    let k0 = u.slice(ndarray::s![0..d, 0..d]).to_owned();
    let k1 = u.slice(ndarray::s![d..dd, 0..d]).to_owned();
    Ok(LocalChannel { kraus: vec![k0, k1] })
}

pub fn gadget_channel(l: &Matrix, g: &Matrix, tau: f64) -> Result<LocalChannel> {
    channel_from_unitary(&gadget_unitary(l, g, tau)?)
}

/// Superoperator of `Tr_anc(U (ρ ⊗ |0><0|) U†)` built column by column from
/// matrix units, with the ancilla traced out explicitly.
pub fn channel_by_partial_trace(u: &Matrix) -> Result<Matrix> {
    let dd = u.nrows();
    if dd % 2 != 0 {
        return Err(Error::Shape(format!("{:?} is not a gadget unitary", u.dim())));
    }
    let d = dd / 2;
    let ud = linalg::dagger(u);
    let mut s = Matrix::zeros((d * d, d * d));
    for i in 0..d {
        for j in 0..d {
            // |0><0|_anc ⊗ |i><j| sits in the top-left block
            let mut big = Matrix::zeros((dd, dd));
            big[[i, j]] = ONE;
            let out = u.dot(&big).dot(&ud);
            for a in 0..d {
                for b in 0..d {
                    s[[a * d + b, i * d + j]] = out[[a, b]] + out[[a + d, b + d]];
                }
            }
        }
    }
    Ok(s)
}

/// `exp(τ 𝓛)` for the single term `(L, G)` on its support.
pub fn exact_local_channel(l: &Matrix, g: &Matrix, tau: f64) -> Result<Matrix> {
    let s = LindbladBlock::new(&[(l, g)]).superop();
    linalg::expm(&s.mapv(|z| z * tau))
}

/// Normalized Choi matrix `J = (1/d) Σ_ij |i><j| ⊗ Φ(|i><j|)` of a row-major
/// superoperator.
pub fn choi_matrix(superop: &Matrix) -> Result<Matrix> {
    let dd = superop.nrows();
    let d = (dd as f64).sqrt().round() as usize;
    if d * d != dd || superop.ncols() != dd {
        return Err(Error::Shape(format!("{:?} is not a superoperator", superop.dim())));
    }
    let inv = 1.0 / d as f64;
    Ok(Matrix::from_shape_fn((dd, dd), |(r, c)| {
        let (i, a) = (r / d, r % d);
        let (j, b) = (c / d, c % d);
        superop[[a * d + b, i * d + j]] * inv
    }))
}

/// Bounds on the diamond distance of two channels from the Choi matrix of
/// their difference: `‖J‖₁ ≤ ‖Φ₁ - Φ₂‖_◇ ≤ d ‖Tr_out |J|‖_∞`.
pub fn diamond_bounds(s1: &Matrix, s2: &Matrix) -> Result<(f64, f64)> {
    if s1.dim() != s2.dim() {
        return Err(Error::Shape(format!("superoperators {:?} and {:?}", s1.dim(), s2.dim())));
    }
    let j = linalg::hermitize(&choi_matrix(&(s1 - s2))?);
    let dd = j.nrows();
    let d = (dd as f64).sqrt().round() as usize;
    let dec = spectral::eig_hermitian(&j)?;
    let lower: f64 = dec.eigenvalues.iter().map(|x| x.abs()).sum();
    let abs_j = dec.function(|x| C64::new(x.abs(), 0.0));
    let mut reduced = Matrix::zeros((d, d));
    for i in 0..d {
        for k in 0..d {
            let mut acc = ZERO;
            for a in 0..d {
                acc += abs_j[[i * d + a, k * d + a]];
            }
            reduced[[i, k]] = acc;
        }
    }
    let top = linalg::eigvalsh(&linalg::hermitize(&reduced))?.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    Ok((lower, (d as f64 * top).max(lower)))
}

/// Diamond-distance upper bound between the gadget channel and `exp(τ𝓛)`.
pub fn channel_distance_lemma1(l: &Matrix, g: &Matrix, tau: f64) -> Result<f64> {
    if tau == 0.0 {
        return Ok(0.0);
    }
    let gadget = gadget_channel(l, g, tau)?.superop();
    Ok(diamond_bounds(&gadget, &exact_local_channel(l, g, tau)?)?.1)
}

/// Least-squares slope of `log y` against `log x`.
pub fn log_log_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}
