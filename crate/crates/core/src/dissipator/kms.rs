//! Gibbs states, KMS detailed balance and superoperator distances.

use super::generator::TruncatedLindbladian;
use crate::error::{Error, Result};
use crate::hamiltonian::LocalHamiltonian;
use crate::linalg::{self, Matrix, C64};
use crate::spectral;

/// `e^{-βH} / tr e^{-βH}` on the whole lattice.
pub fn gibbs_state(h: &LocalHamiltonian, beta: f64) -> Result<Matrix> {
    gibbs_state_dense(&h.dense()?, beta)
}

pub fn gibbs_state_dense(h: &Matrix, beta: f64) -> Result<Matrix> {
    let dec = spectral::eig_hermitian(h)?;
    Ok(spectral::thermal_state(&dec, beta))
}

/// Largest `β‖H‖` for which `ρ^{-1/2}` is formed.
pub const KMS_CONDITIONING_LIMIT: f64 = 50.0;

/// `‖S† - Γ_{-1/2} S Γ_{1/2}‖ / ‖S‖`, both norms being the largest column
/// 2-norm, with `Γ_c(X) = ρ^c X ρ^c` and `ρ` the Gibbs state of `h_ref`.
pub fn kms_residual(superop: &Matrix, h_ref: &Matrix, beta: f64) -> Result<f64> {
    let d = h_ref.nrows();
    if superop.dim() != (d * d, d * d) {
        return Err(Error::Shape(format!("superoperator {:?} vs Hamiltonian of dim {d}", superop.dim())));
    }
    let dec = spectral::eig_hermitian(h_ref)?;
    let scale = beta * dec.spectral_radius();
    if scale > KMS_CONDITIONING_LIMIT {
        return Err(Error::IllConditioned(format!("β‖H‖ = {scale:.1} exceeds {KMS_CONDITIONING_LIMIT}")));
    }
    let lmin = dec.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
    let z: f64 = dec.eigenvalues.iter().map(|&l| (-beta * (l - lmin)).exp()).sum();
    let power = |c: f64| dec.function(|l| C64::new(((-beta * (l - lmin)).exp() / z).powf(c), 0.0));
    let gamma = |c: f64| {
        let p = power(c);
        linalg::kron(&p, &p.t().to_owned())
    };
    let rhs = gamma(-0.5).dot(superop).dot(&gamma(0.5));
    let diff = linalg::dagger(superop) - rhs;
    let col_norm = |m: &Matrix| m.columns().into_iter().map(|c| c.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()).fold(0.0, f64::max);
    let s = col_norm(superop);
    Ok(if s == 0.0 { 0.0 } else { col_norm(&diff) / s })
}

/// KMS residual of the whole truncated Lindbladian against the full Gibbs state.
pub fn kms_residual_full(lind: &TruncatedLindbladian) -> Result<f64> {
    kms_residual(&lind.superop_full()?, &lind.hamiltonian.dense()?, lind.beta())
}

/// Per-generator residuals against the Gibbs state of its own patch `H_{a,r}`.
/// A translated generator inherits its reference's residual, which is
/// invariant under relabeling the sites.
pub fn local_kms_residuals(lind: &TruncatedLindbladian) -> Result<Vec<f64>> {
    let mut out: Vec<f64> = Vec::with_capacity(lind.generators.len());
    let mut patch: Option<(usize, Matrix)> = None;
    for g in &lind.generators {
        if let Some(link) = &g.link {
            out.push(out[link.reference]);
            continue;
        }
        if patch.as_ref().map_or(true, |(a, _)| *a != g.site) {
            patch = Some((g.site, lind.hamiltonian.truncate(g.site, lind.r())?.dense()?));
        }
        let (_, h) = patch.as_ref().expect("set above");
        out.push(kms_residual(&g.superop(), h, lind.beta())?);
    }
    Ok(out)
}

/// Lower and upper bounds on the induced trace-norm (1→1) of a superoperator
/// on a `d`-dimensional space: the largest image of a matrix unit, and
/// `√d σ_max(S)`.
pub fn induced_one_norm_bounds(superop: &Matrix) -> Result<(f64, f64)> {
    let dd = superop.nrows();
    let d = (dd as f64).sqrt().round() as usize;
    if d * d != dd || superop.ncols() != dd {
        return Err(Error::Shape(format!("{:?} is not a superoperator", superop.dim())));
    }
    let mut lower: f64 = 0.0;
    for col in 0..dd {
        let image = superop.column(col).to_owned().into_shape((d, d)).expect("square");
        lower = lower.max(linalg::trace_norm(&image)?);
    }
    let upper = (d as f64).sqrt() * linalg::spectral_norm(superop)?;
    Ok((lower, upper.max(lower)))
}
