//! Empirical contraction of state differences under the semigroup.

use serde::Serialize;

use crate::dissipator::{generator_norm_bound, LindbladAction, TruncatedLindbladian};
use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};

use super::exact::integrate;

/// RMS deviation of `ln d(t)` from the fitted line above which decay is
/// reported as non-exponential.
pub const NON_EXPONENTIAL_RESIDUAL: f64 = 0.05;

/// The dense spectral gap is computed up to this many sites.
pub const GAP_MAX_SITES: usize = 5;

#[derive(Clone, Debug, Serialize)]
pub struct MixingReport {
    pub times: Vec<f64>,
    /// `max over pairs ‖e^{t𝓛}(ρ−ρ′)‖₁ / ‖ρ−ρ′‖₁` at each time.
    pub distances: Vec<f64>,
    /// Minus the least-squares slope of `ln d(t)` against `t`.
    pub rate: f64,
    pub fit_residual: f64,
    pub non_exponential: bool,
    /// First time the normalized distance reaches 1/2 (log-linear
    /// interpolation between grid points).
    pub t_mix: Option<f64>,
    /// `-max Re λ` over the nonzero eigenvalues of the dense generator.
    pub gap: Option<f64>,
}

/// Contraction of `ρ − ρ′` for every pair on the increasing grid `t_grid`
/// (which must start at 0).
pub fn mixing_rate_estimate(lind: &TruncatedLindbladian, pairs: &[(Matrix, Matrix)], t_grid: &[f64]) -> Result<MixingReport> {
    if pairs.is_empty() || t_grid.len() < 2 {
        return Err(Error::InvalidParameter("need at least one state pair and two grid times".into()));
    }
    if t_grid[0] != 0.0 || t_grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidParameter("time grid must start at 0 and increase".into()));
    }
    let action = LindbladAction::new(lind)?;
    let norm = generator_norm_bound(lind)?;
    let mut distances = vec![0.0f64; t_grid.len()];
    for (rho, sigma) in pairs {
        let diff = linalg::hermitize(&(rho - sigma));
        let d0 = linalg::trace_norm(&diff)?;
        if d0 == 0.0 {
            continue;
        }
        let dim = diff.nrows();
        let mut x = diff.into_raw_vec();
        distances[0] = distances[0].max(1.0);
        for k in 1..t_grid.len() {
            integrate(&action, &mut x, t_grid[k] - t_grid[k - 1], norm)?;
            let m = linalg::hermitize(&Matrix::from_shape_vec((dim, dim), x.clone()).expect("square"));
            distances[k] = distances[k].max(linalg::trace_norm(&m)? / d0);
        }
    }
    if distances[0] == 0.0 {
        return Err(Error::InvalidParameter("every state pair is identical".into()));
    }

    let pts: Vec<(f64, f64)> = t_grid.iter().zip(&distances).filter(|(_, &d)| d > 1e-12).map(|(&t, &d)| (t, d.ln())).collect();
    let (rate, fit_residual) = fit_line(&pts);
    let t_mix = t_grid.windows(2).zip(distances.windows(2)).find(|(_, d)| d[1] <= 0.5).map(|(t, d)| {
        if d[0] <= 0.5 {
            t[0]
        } else {
            let (l0, l1) = (d[0].ln(), d[1].ln());
            t[0] + (t[1] - t[0]) * (l0 - 0.5f64.ln()) / (l0 - l1)
        }
    });
    let gap = if lind.n_sites() <= GAP_MAX_SITES { Some(spectral_gap(lind)?) } else { None };
    Ok(MixingReport { times: t_grid.to_vec(), distances, rate, fit_residual, non_exponential: fit_residual > NON_EXPONENTIAL_RESIDUAL, t_mix, gap })
}

/// Returns `(-slope, rms residual)` of the least-squares line through `pts`.
fn fit_line(pts: &[(f64, f64)]) -> (f64, f64) {
    if pts.len() < 2 {
        return (f64::NAN, f64::NAN);
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let slope = sxy / sxx;
    let rms = (pts.iter().map(|p| (p.1 - my - slope * (p.0 - mx)).powi(2)).sum::<f64>() / n).sqrt();
    (-slope, rms)
}

/// Spectral gap of the dense generator.
pub fn spectral_gap(lind: &TruncatedLindbladian) -> Result<f64> {
    let s = lind.superop_full()?;
    let mut ev = linalg::eigvals_general(&s)?;
    ev.sort_by(|a, b| b.re.partial_cmp(&a.re).expect("finite eigenvalues"));
    // the stationary eigenvalue is the one closest to zero
    let zero = ev.iter().enumerate().min_by(|a, b| a.1.norm().partial_cmp(&b.1.norm()).expect("finite")).map(|(i, _)| i).expect("nonempty");
    Ok(ev.iter().enumerate().filter(|(i, _)| *i != zero).map(|(_, z)| -z.re).fold(f64::INFINITY, f64::min))
}
