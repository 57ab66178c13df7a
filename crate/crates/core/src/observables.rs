//! Energy density, connected correlators, heat capacity and correlation-length fits.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::hamiltonian::LocalHamiltonian;
use crate::linalg::{self, Matrix, C64, ZERO};
use crate::pauli::{Pauli, PauliString, PauliWord};
use crate::spectral::SpectralDecomposition;
use crate::state;

/// Magnitudes below this are excluded from correlation-length fits.
pub const FIT_FLOOR: f64 = 1e-12;

fn words(h: &LocalHamiltonian) -> Vec<(f64, PauliWord)> {
    let n = h.n_sites();
    h.terms().iter().map(|t| (t.coefficient, t.word(n))).collect()
}

fn check_sites(rho: &Matrix, h: &LocalHamiltonian) -> Result<()> {
    let n = state::qubits_of(rho)?;
    if n != h.n_sites() {
        return Err(Error::Shape(format!("state on {n} qubits, Hamiltonian on {}", h.n_sites())));
    }
    Ok(())
}

/// `tr(ρH)` summed term by term over Pauli strings. Terms are evaluated in
/// parallel and summed in order, so the result does not depend on the
/// thread count.
pub fn energy(rho: &Matrix, h: &LocalHamiltonian) -> Result<f64> {
    check_sites(rho, h)?;
    let parts: Vec<f64> = words(h).par_iter().map(|(c, w)| c * w.trace_with(rho).re).collect();
    Ok(parts.iter().sum())
}

/// `<ψ|H|ψ>` for a normalized statevector.
pub fn energy_vector(psi: &[C64], h: &LocalHamiltonian) -> f64 {
    words(h).iter().map(|(c, w)| c * w.expectation_vector(psi).re).sum()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EnergyMetrics {
    /// `tr(ρH)/n`.
    pub energy_density: f64,
    /// `|tr(ρH) − tr(ρ_β H)|/n`.
    pub delta: f64,
}

pub fn energy_metrics(rho: &Matrix, h: &LocalHamiltonian, rho_beta: &Matrix) -> Result<EnergyMetrics> {
    let reference = energy(rho_beta, h)?;
    energy_metrics_against(rho, h, reference)
}

/// As `energy_metrics` with the reference energy `tr(ρ_β H)` precomputed.
pub fn energy_metrics_against(rho: &Matrix, h: &LocalHamiltonian, reference_energy: f64) -> Result<EnergyMetrics> {
    let n = h.n_sites() as f64;
    let e = energy(rho, h)?;
    Ok(EnergyMetrics { energy_density: e / n, delta: (e - reference_energy).abs() / n })
}

fn z_word(n: usize, a: usize) -> PauliWord {
    PauliString::new(1.0, &[(a, Pauli::Z)]).word(n)
}

fn zz_word(n: usize, a: usize, b: usize) -> PauliWord {
    PauliString::new(1.0, &[(a, Pauli::Z), (b, Pauli::Z)]).word(n)
}

fn check_pair(n: usize, a1: usize, a2: usize) -> Result<()> {
    if a1 == a2 {
        return Err(Error::InvalidParameter(format!("correlator needs distinct sites, got {a1} twice")));
    }
    for a in [a1, a2] {
        if a >= n {
            return Err(Error::SiteOutOfRange { site: a, n_sites: n });
        }
    }
    Ok(())
}

/// `⟨S^z_{a₁} S^z_{a₂}⟩ − ⟨S^z_{a₁}⟩⟨S^z_{a₂}⟩` with `S^z = Z/2`.
pub fn two_point_correlator(rho: &Matrix, a1: usize, a2: usize) -> Result<f64> {
    let n = state::qubits_of(rho)?;
    check_pair(n, a1, a2)?;
    let zz = zz_word(n, a1, a2).trace_with(rho).re;
    let z1 = z_word(n, a1).trace_with(rho).re;
    let z2 = z_word(n, a2).trace_with(rho).re;
    Ok(0.25 * (zz - z1 * z2))
}

pub fn two_point_correlator_vector(psi: &[C64], a1: usize, a2: usize) -> Result<f64> {
    let n = psi.len().trailing_zeros() as usize;
    if psi.len() != 1 << n {
        return Err(Error::Shape(format!("statevector of length {}", psi.len())));
    }
    check_pair(n, a1, a2)?;
    let zz = zz_word(n, a1, a2).expectation_vector(psi).re;
    let z1 = z_word(n, a1).expectation_vector(psi).re;
    let z2 = z_word(n, a2).expectation_vector(psi).re;
    Ok(0.25 * (zz - z1 * z2))
}

/// Site pairs `(n/2, n/2 + ℓ)` for `ℓ = 1..=max_sep`, wrapping periodically.
pub fn correlator_pairs(n: usize, max_sep: usize) -> Vec<(usize, usize)> {
    let a = n / 2;
    (1..=max_sep).map(|l| (a, (a + l) % n)).collect()
}

/// Correlators at separations `1..=max_sep` from the middle site.
pub fn correlator_profile(rho: &Matrix, max_sep: usize) -> Result<Vec<f64>> {
    let n = state::qubits_of(rho)?;
    if max_sep >= n {
        return Err(Error::InvalidParameter(format!("separation {max_sep} on {n} sites")));
    }
    correlator_pairs(n, max_sep).into_par_iter().map(|(a, b)| two_point_correlator(rho, a, b)).collect()
}

/// `β²(⟨H²⟩ − ⟨H⟩²)` with `H²` formed densely.
pub fn heat_capacity(rho: &Matrix, h: &LocalHamiltonian, beta: f64) -> Result<f64> {
    check_sites(rho, h)?;
    let hd = h.dense()?;
    let hr = hd.dot(rho);
    let mean = linalg::trace(&hr).re;
    let h2 = linalg::trace(&hd.dot(&hr)).re;
    Ok(beta * beta * (h2 - mean * mean))
}

/// Heat capacity from the Pauli expansion `H² = Σ_{ij} c_i c_j P_i P_j`.
pub fn heat_capacity_pauli(rho: &Matrix, h: &LocalHamiltonian, beta: f64) -> Result<f64> {
    check_sites(rho, h)?;
    let ws = words(h);
    let mean: f64 = ws.iter().map(|(c, w)| c * w.trace_with(rho).re).sum();
    let rows: Vec<f64> = ws
        .par_iter()
        .map(|(ci, wi)| ws.iter().map(|(cj, wj)| ci * cj * wi.mul(wj).trace_with(rho).re).sum::<f64>())
        .collect();
    let h2: f64 = rows.iter().sum();
    Ok(beta * beta * (h2 - mean * mean))
}

/// Heat capacity from moments of `ρ` in the eigenbasis of `H`.
pub fn heat_capacity_eigen(rho: &Matrix, dec: &SpectralDecomposition, beta: f64) -> Result<f64> {
    if rho.nrows() != dec.dim() {
        return Err(Error::Shape(format!("state of dimension {} against a spectrum of {}", rho.nrows(), dec.dim())));
    }
    let diag = dec.to_eigenbasis(rho);
    let (mut m1, mut m2) = (0.0, 0.0);
    for (i, &lam) in dec.eigenvalues.iter().enumerate() {
        let p = diag[[i, i]].re;
        m1 += p * lam;
        m2 += p * lam * lam;
    }
    Ok(beta * beta * (m2 - m1 * m1))
}

/// `H|ψ⟩` through the Pauli strings of `H`.
pub fn apply_hamiltonian_vector(h: &LocalHamiltonian, psi: &[C64]) -> Vec<C64> {
    let mut out = vec![ZERO; psi.len()];
    for (c, w) in words(h) {
        for (j, &a) in psi.iter().enumerate() {
            let (k, amp) = w.apply_basis(j);
            out[k] += amp * a * c;
        }
    }
    out
}

/// `[⟨ψ|H|ψ⟩, ‖Hψ‖²]`.
pub fn energy_moments_vector(h: &LocalHamiltonian, psi: &[C64]) -> Vec<f64> {
    let hp = apply_hamiltonian_vector(h, psi);
    let e: f64 = psi.iter().zip(&hp).map(|(a, b)| (a.conj() * b).re).sum();
    vec![e, hp.iter().map(|z| z.norm_sqr()).sum()]
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct JackknifeEstimate {
    pub value: f64,
    pub std_error: f64,
}

/// Heat capacity of the trajectory ensemble average, using `⟨H⟩ = ⟨ψ|H|ψ⟩`
/// and `⟨H²⟩ = ‖Hψ‖²` per trajectory, with a leave-one-out jackknife error.
pub fn heat_capacity_trajectories(states: &[Vec<C64>], h: &LocalHamiltonian, beta: f64) -> Result<JackknifeEstimate> {
    let samples: Vec<Vec<f64>> = states.par_iter().map(|psi| energy_moments_vector(h, psi)).collect();
    jackknife(&samples, |m| beta * beta * (m[1] - m[0] * m[0]))
}

/// Leave-one-out jackknife of `f(sample means)` over per-trajectory samples.
pub fn jackknife<F: Fn(&[f64]) -> f64>(samples: &[Vec<f64>], f: F) -> Result<JackknifeEstimate> {
    let n = samples.len();
    if n < 2 {
        return Err(Error::InvalidParameter("jackknife needs at least two samples".into()));
    }
    let k = samples[0].len();
    if samples.iter().any(|s| s.len() != k) {
        return Err(Error::Shape("samples of unequal length".into()));
    }
    let nf = n as f64;
    let mut total = vec![0.0; k];
    for s in samples {
        total.iter_mut().zip(s).for_each(|(t, v)| *t += v);
    }
    let value = f(&total.iter().map(|t| t / nf).collect::<Vec<_>>());
    let mut loo = Vec::with_capacity(n);
    let mut buf = vec![0.0; k];
    for s in samples {
        for j in 0..k {
            buf[j] = (total[j] - s[j]) / (nf - 1.0);
        }
        loo.push(f(&buf));
    }
    let loo_mean = loo.iter().sum::<f64>() / nf;
    let var = (nf - 1.0) / nf * loo.iter().map(|v| (v - loo_mean).powi(2)).sum::<f64>();
    Ok(JackknifeEstimate { value, std_error: var.sqrt() })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LengthFit {
    /// `−1/slope`; NaN when the decay is flagged.
    pub length: f64,
    pub slope: f64,
    pub intercept: f64,
    /// RMS residual of the fit to `log|δ|`.
    pub residual: f64,
    pub points: usize,
    /// Slope of `log|δ|` is not negative.
    pub nonpositive_decay: bool,
}

/// Least-squares fit of `log|δ(ℓ)|` against `ℓ`, skipping `|δ| ≤ FIT_FLOOR`.
pub fn correlation_length_fit(seps: &[f64], deltas: &[f64]) -> Result<LengthFit> {
    if seps.len() != deltas.len() {
        return Err(Error::Shape(format!("{} separations for {} correlators", seps.len(), deltas.len())));
    }
    let pts: Vec<(f64, f64)> = seps.iter().zip(deltas).filter(|(_, d)| d.abs() > FIT_FLOOR).map(|(&l, d)| (l, d.abs().ln())).collect();
    if pts.len() < 3 {
        return Err(Error::InvalidParameter(format!("{} usable correlators, need at least 3", pts.len())));
    }
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidParameter("separations must not all coincide".into()));
    }
    let slope = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>() / sxx;
    let intercept = my - slope * mx;
    let residual = (pts.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum::<f64>() / k).sqrt();
    let nonpositive_decay = slope >= 0.0;
    let length = if nonpositive_decay { f64::NAN } else { -1.0 / slope };
    if nonpositive_decay {
        log::warn!("correlators do not decay (slope {slope:.3e})");
    }
    Ok(LengthFit { length, slope, intercept, residual, points: pts.len(), nonpositive_decay })
}

/// Observables of one run, with the trace over recorded times.
#[derive(Clone, Debug, Default, Serialize)]
pub struct ObservableReport {
    pub times: Vec<f64>,
    pub energy_density: Vec<f64>,
    pub delta_energy: Vec<f64>,
    /// `correlators[i][ℓ-1]` at `times[i]`.
    pub correlators: Vec<Vec<f64>>,
    pub heat_capacity: Option<f64>,
    pub length_fit: Option<LengthFit>,
}

impl ObservableReport {
    /// Appends energy metrics (and correlators up to `max_sep`, if nonzero) at time `t`.
    pub fn record(&mut self, t: f64, rho: &Matrix, h: &LocalHamiltonian, reference_energy: f64, max_sep: usize) -> Result<()> {
        let m = energy_metrics_against(rho, h, reference_energy)?;
        self.times.push(t);
        self.energy_density.push(m.energy_density);
        self.delta_energy.push(m.delta);
        if max_sep > 0 {
            self.correlators.push(correlator_profile(rho, max_sep)?);
        }
        Ok(())
    }
}
