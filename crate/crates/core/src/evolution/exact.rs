//! Deterministic product formula and the exact references it is compared with.

use crate::dissipator::{generator_norm_bound, ActionScratch, HermitianAction, LindbladAction, TruncatedLindbladian};
use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};
use crate::state;

use super::channels::{ChannelKind, ChannelSet, EvolutionScratch};
use super::plan::{DrawMode, TrotterPlan};

/// Largest lattice for which the per-trajectory expectation is enumerated.
pub const ENUMERATION_MAX_SITES: usize = 8;

fn check_input(lind: &TruncatedLindbladian, rho0: &Matrix, plan: &TrotterPlan) -> Result<Matrix> {
    let n = lind.n_sites();
    plan.validate(n)?;
    if state::qubits_of(rho0)? != n {
        return Err(Error::Shape(format!("state of dimension {} on {n} sites", rho0.nrows())));
    }
    Ok(rho0.as_standard_layout().into_owned())
}

/// `[Π_a exp(τ Σ_α 𝓛_{a,α})]^M ρ₀` with sites composed in `plan.site_order`.
pub fn deterministic_trotter_evolve(lind: &TruncatedLindbladian, rho0: &Matrix, plan: &TrotterPlan) -> Result<Matrix> {
    deterministic_trotter_observed(lind, rho0, plan, |_, _| {})
}

/// As `deterministic_trotter_evolve`, calling `observe(step, ρ)` after
/// every step (and once with step 0 before the first).
pub fn deterministic_trotter_observed<F: FnMut(usize, &Matrix)>(lind: &TruncatedLindbladian, rho0: &Matrix, plan: &TrotterPlan, observe: F) -> Result<Matrix> {
    let rho = check_input(lind, rho0, plan)?;
    let channels = ChannelSet::new(lind, plan.tau, ChannelKind::Deterministic)?;
    Ok(run_channel_steps(&channels, rho, plan, observe))
}

/// Applies `plan.steps` full steps of `channels`, observing after each.
pub fn run_channel_steps<F: FnMut(usize, &Matrix)>(channels: &ChannelSet, mut rho: Matrix, plan: &TrotterPlan, mut observe: F) -> Matrix {
    let mut scratch = EvolutionScratch::new();
    observe(0, &rho);
    for m in 1..=plan.steps {
        channels.step(&mut rho, &plan.site_order, None, &mut scratch);
        observe(m, &rho);
    }
    rho
}

/// Exact expectation of the randomized product formula.
///
/// Per-step draws make the mean a product of per-site averaged channels;
/// per-trajectory draws are enumerated over all `3^n` assignments.
pub fn exact_mean_evolve(lind: &TruncatedLindbladian, rho0: &Matrix, plan: &TrotterPlan) -> Result<Matrix> {
    exact_mean_observed(lind, rho0, plan, |_, _| {})
}

/// As `exact_mean_evolve` with an observer; per-trajectory mode reports the
/// averaged state after every step.
pub fn exact_mean_observed<F: FnMut(usize, &Matrix)>(lind: &TruncatedLindbladian, rho0: &Matrix, plan: &TrotterPlan, mut observe: F) -> Result<Matrix> {
    let rho = check_input(lind, rho0, plan)?;
    let n = lind.n_sites();
    match plan.draw_mode {
        DrawMode::PerStep => {
            let channels = ChannelSet::new(lind, plan.tau, ChannelKind::Mean { rescale: plan.rescale })?;
            Ok(run_channel_steps(&channels, rho, plan, observe))
        }
        DrawMode::PerTrajectory => {
            if n > ENUMERATION_MAX_SITES {
                return Err(Error::CapExceeded { dim: 3usize.pow(n as u32), cap: 3usize.pow(ENUMERATION_MAX_SITES as u32) });
            }
            let channels = ChannelSet::new(lind, plan.tau, ChannelKind::Sampled { rescale: plan.rescale })?;
            let count = 3usize.pow(n as u32);
            let mut sums = vec![Matrix::zeros(rho.dim()); plan.steps + 1];
            let mut scratch = EvolutionScratch::new();
            let mut alphas = vec![0usize; n];
            for code in 0..count {
                let mut c = code;
                for al in alphas.iter_mut() {
                    *al = c % 3;
                    c /= 3;
                }
                let mut r = rho.clone();
                sums[0] += &r;
                for sum in sums.iter_mut().skip(1) {
                    channels.step(&mut r, &plan.site_order, Some(&alphas), &mut scratch);
                    *sum += &r;
                }
            }
            let w = 1.0 / count as f64;
            for (m, s) in sums.iter_mut().enumerate() {
                s.mapv_inplace(|z| z * w);
                observe(m, s);
            }
            Ok(sums.pop().expect("at least the initial state"))
        }
    }
}

/// `e^{t𝓛} ρ₀` by twelfth-order Taylor steps of size at most `0.25/‖𝓛‖`.
pub fn exact_evolve(lind: &TruncatedLindbladian, rho0: &Matrix, t: f64) -> Result<Matrix> {
    let action = LindbladAction::new(lind)?;
    let d = rho0.nrows();
    let mut x = linalg::hermitize(rho0).into_raw_vec();
    integrate(&action, &mut x, t, generator_norm_bound(lind)?)?;
    Ok(Matrix::from_shape_vec((d, d), x).expect("square"))
}

/// Propagates Hermitian `x` by `e^{t𝓛}` in place.
pub(crate) fn integrate(action: &dyn HermitianAction, x: &mut [crate::linalg::C64], t: f64, norm: f64) -> Result<()> {
    if !(t >= 0.0) {
        return Err(Error::InvalidParameter(format!("evolution time must be nonnegative, got {t}")));
    }
    if t == 0.0 {
        return Ok(());
    }
    let substeps = (t * norm / 0.25).ceil().max(1.0) as usize;
    let dt = t / substeps as f64;
    let mut scratch = ActionScratch::new(action.n_sites());
    let (mut term, mut next) = (Vec::new(), Vec::new());
    for _ in 0..substeps {
        action.taylor_step(x, dt, 12, &mut scratch, &mut term, &mut next);
    }
    Ok(())
}

/// Dense `exp(t 𝓛)` on the whole lattice.
pub fn exact_semigroup_superop(lind: &TruncatedLindbladian, t: f64) -> Result<Matrix> {
    let s = lind.superop_full()?;
    linalg::expm(&s.mapv(|z| z * t))
}

/// Dense superoperator of one deterministic product-formula step.
pub fn trotter_step_superop(lind: &TruncatedLindbladian, plan: &TrotterPlan) -> Result<Matrix> {
    plan.validate(lind.n_sites())?;
    ChannelSet::new(lind, plan.tau, ChannelKind::Deterministic)?.step_superop(&plan.site_order, None)
}

/// Dense superoperator of the exact mean of one randomized step (per-step draws).
pub fn mean_step_superop(lind: &TruncatedLindbladian, plan: &TrotterPlan) -> Result<Matrix> {
    plan.validate(lind.n_sites())?;
    ChannelSet::new(lind, plan.tau, ChannelKind::Mean { rescale: plan.rescale })?.step_superop(&plan.site_order, None)
}

/// `S^m` by repeated squaring.
pub fn superop_power(s: &Matrix, mut m: usize) -> Matrix {
    let mut result = linalg::identity(s.nrows());
    let mut base = s.clone();
    while m > 0 {
        if m & 1 == 1 {
            result = result.dot(&base);
        }
        m >>= 1;
        if m > 0 {
            base = base.dot(&base);
        }
    }
    result
}
