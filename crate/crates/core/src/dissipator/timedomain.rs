//! Time-domain kernels of the Gaussian filter, used only as a cross-check of
//! the frequency-domain construction.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::linalg::C64;

fn check_beta(beta: f64) -> Result<()> {
    if beta > 0.0 && beta.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("β must be positive, got {beta}")))
    }
}

/// `f(t) = √(2/(πβ²)) exp((β - 4it)² / (8β²))`.
pub fn filter_time_domain(beta: f64, t: f64) -> Result<C64> {
    check_beta(beta)?;
    let w = C64::new(beta, -4.0 * t);
    Ok((w * w / (8.0 * beta * beta)).exp() * (2.0 / (PI * beta * beta)).sqrt())
}

/// `g₂(t) = (2√2/β) exp((β - 4it)² / (4β²))`.
pub fn g2(beta: f64, t: f64) -> Result<C64> {
    check_beta(beta)?;
    let w = C64::new(beta, -4.0 * t);
    Ok((w * w / (4.0 * beta * beta)).exp() * (2.0 * 2f64.sqrt() / beta))
}

/// `g₁ = k * h` with `k(s) = -1/(πβ cosh(2πs/β))` and
/// `h(u) = (√2/β) e^{1/4 - 4u²/β²} sin(2u/β)`, by trapezoidal quadrature.
pub fn g1(beta: f64, t: f64) -> Result<f64> {
    check_beta(beta)?;
    let k = |s: f64| -1.0 / (PI * beta * (2.0 * PI * s / beta).cosh());
    let h = |u: f64| 2f64.sqrt() / beta * (0.25 - 4.0 * u * u / (beta * beta)).exp() * (2.0 * u / beta).sin();
    // k decays like e^{-2π|s|/β}; 8β leaves e^{-50}
    let half = 8.0 * beta;
    let mut prev = f64::NAN;
    for level in 8..20 {
        let m = 1usize << level;
        let step = 2.0 * half / m as f64;
        let mut acc = 0.0;
        for i in 0..=m {
            let s = -half + i as f64 * step;
            let w = if i == 0 || i == m { 0.5 } else { 1.0 };
            acc += w * k(s) * h(t - s);
        }
        acc *= step;
        if (acc - prev).abs() <= 1e-13 * acc.abs().max(1e-3) {
            return Ok(acc);
        }
        prev = acc;
    }
    Err(Error::NoConvergence("g1 quadrature".into()))
}

/// `∫ f(t) e^{-iνt} dt` by trapezoidal quadrature on a grid refined until stable.
pub fn filter_fourier(beta: f64, nu: f64) -> Result<C64> {
    check_beta(beta)?;
    // |f(t)| ∝ e^{-2t²/β²}; 6β leaves e^{-72}
    let half = 6.0 * beta;
    let mut prev = C64::new(f64::NAN, 0.0);
    for level in 6..22 {
        let m = 1usize << level;
        let step = 2.0 * half / m as f64;
        let mut acc = C64::new(0.0, 0.0);
        for i in 0..=m {
            let t = -half + i as f64 * step;
            let w = if i == 0 || i == m { 0.5 } else { 1.0 };
            acc += filter_time_domain(beta, t)? * C64::new(0.0, -nu * t).exp() * w;
        }
        acc *= step;
        if (acc - prev).norm() <= 1e-12 {
            return Ok(acc);
        }
        prev = acc;
    }
    Err(Error::NoConvergence(format!("Fourier quadrature at ν = {nu}")))
}

/// Largest deviation over `ν ∈ [-8, 8]` between the numerical Fourier
/// transform of `f` and `q(ν) e^{-βν/4}` for the Gaussian envelope.
pub fn consistency_check(beta: f64) -> Result<f64> {
    let q = super::envelope::Envelope::new(super::envelope::EnvelopeKind::Gaussian, beta);
    let mut worst: f64 = 0.0;
    for i in 0..=160 {
        let nu = -8.0 + 0.1 * i as f64;
        let exact = q.eval(nu) * (-beta * nu / 4.0).exp();
        worst = worst.max((filter_fourier(beta, nu)? - exact).norm());
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_values() {
        let f0 = filter_time_domain(1.0, 0.0).unwrap();
        assert!((f0.re - (2.0 / PI).sqrt() * 0.125f64.exp()).abs() < 1e-15 && f0.im == 0.0);
        assert!((f0.re - 0.90412).abs() < 1e-5);
        let g = g2(1.0, 0.0).unwrap();
        assert!((g.re - 2.0 * 2f64.sqrt() * 0.25f64.exp()).abs() < 1e-14);
        assert!((g.re - 3.6318).abs() < 1e-4);
    }

    #[test]
    fn fourier_consistency() {
        assert!(consistency_check(1.0).unwrap() <= 1e-6);
        assert!(consistency_check(2.5).unwrap() <= 1e-6);
    }

    #[test]
    fn g1_is_odd_and_integrable() {
        for t in [0.1, 0.4, 1.3] {
            let a = g1(1.0, t).unwrap();
            let b = g1(1.0, -t).unwrap();
            assert!((a + b).abs() < 1e-12);
        }
        assert!(g1(1.0, 0.0).unwrap().abs() < 1e-12);
        // |g1| ≤ ‖k‖₁ ‖h‖∞ with ‖k‖₁ = 1/(2π)
        let bound = 2f64.sqrt() * 0.25f64.exp() / (2.0 * PI);
        assert!(g1(1.0, 0.3).unwrap().abs() < bound);
    }

    #[test]
    fn g2_modulus() {
        for t in [0.0, 0.5, 2.0] {
            let m = g2(2.0, t).unwrap().norm();
            assert!((m - 2f64.sqrt() * (0.25 - t * t).exp()).abs() < 1e-13);
        }
    }

    #[test]
    fn rejects_nonpositive_beta() {
        assert!(filter_time_domain(0.0, 1.0).is_err());
        assert!(g1(-1.0, 0.0).is_err());
    }
}
