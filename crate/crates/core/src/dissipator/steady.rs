//! Fixed points of the truncated Lindbladian.
//!
//! Three routes share the residual target `‖𝓛(ρ)‖₁ ≤ tol`:
//! - `Dense`: null vector of the full superoperator (n ≤ 6);
//! - `Gmres`: Krylov solve of `𝓛(δ) = -𝓛(ρ₀)` on Hermitian operators;
//! - `Integrate`: Taylor-stepped `e^{t𝓛} ρ₀` until the residual target.

use serde::{Deserialize, Serialize};

use super::action::{pack_hermitian, unpack_hermitian, ActionScratch, HermitianAction, LindbladAction, SymmetricAction};
use super::generator::TruncatedLindbladian;
use super::kms::gibbs_state;
use crate::error::{Error, Result};
use crate::kernel;
use crate::linalg::{self, Matrix, ONE, ZERO};
use crate::solver::{gmres, GmresOptions};
use crate::state;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SteadyMethod {
    /// Dense for n ≤ 6, GMRES above.
    Auto,
    Dense,
    Gmres,
    Integrate,
}

#[derive(Clone, Debug)]
pub enum InitialState {
    MaximallyMixed,
    /// Gibbs state of the full Hamiltonian at the Lindbladian's β.
    Gibbs,
    Custom(Matrix),
}

#[derive(Clone, Debug)]
pub struct SteadyOptions {
    pub method: SteadyMethod,
    /// Target for `‖𝓛(ρ)‖₁`.
    pub tol: f64,
    pub initial: InitialState,
    pub max_iter: usize,
    pub restart: usize,
    /// Memory budget for the Krylov basis.
    pub krylov_bytes: usize,
    /// Upper bound on the integration time.
    pub max_time: f64,
}

impl Default for SteadyOptions {
    fn default() -> Self {
        SteadyOptions {
            method: SteadyMethod::Auto,
            tol: 1e-8,
            initial: InitialState::MaximallyMixed,
            max_iter: 5000,
            restart: 40,
            krylov_bytes: 1 << 30,
            max_time: 2000.0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct SteadyState {
    pub rho: Matrix,
    /// `‖𝓛(ρ)‖₁` of the returned state.
    pub residual: f64,
    pub method: SteadyMethod,
    /// Operator applications (GMRES), Taylor steps (integration) or 1 (dense).
    pub iterations: usize,
}

/// Largest system the dense route handles.
pub const DENSE_STEADY_MAX_SITES: usize = 6;

pub fn steady_state(lind: &TruncatedLindbladian, opts: &SteadyOptions) -> Result<SteadyState> {
    let method = match opts.method {
        SteadyMethod::Auto if lind.n_sites() <= DENSE_STEADY_MAX_SITES => SteadyMethod::Dense,
        SteadyMethod::Auto => SteadyMethod::Gmres,
        m => m,
    };
    let out = match method {
        SteadyMethod::Dense => steady_state_dense(lind)?,
        SteadyMethod::Gmres => steady_state_gmres(lind, opts)?,
        _ => steady_state_integrate(lind, opts)?,
    };
    if out.residual > opts.tol {
        return Err(Error::NoConvergence(format!("steady-state residual {:.3e} above {:.1e}", out.residual, opts.tol)));
    }
    Ok(out)
}

/// `‖𝓛(ρ)‖₁`.
pub fn steady_residual(lind: &TruncatedLindbladian, rho: &Matrix) -> Result<f64> {
    let out = action_for(lind, false)?.apply_matrix_hermitian(rho);
    linalg::trace_norm(&linalg::hermitize(&out))
}

/// Null vector of the dense superoperator with the trace fixed to one.
pub fn steady_state_dense(lind: &TruncatedLindbladian) -> Result<SteadyState> {
    let n = lind.n_sites();
    if n > DENSE_STEADY_MAX_SITES {
        return Err(Error::CapExceeded { dim: 1 << (2 * n), cap: 1 << (2 * DENSE_STEADY_MAX_SITES) });
    }
    let d = 1usize << n;
    let mut s = lind.superop_full()?;
    s.row_mut(0).fill(ZERO);
    for i in 0..d {
        s[[0, i * d + i]] = ONE;
    }
    let mut rhs = Matrix::zeros((d * d, 1));
    rhs[[0, 0]] = ONE;
    let x = linalg::solve(&s, &rhs)?;
    let rho = finalize(x.into_shape((d, d)).expect("square"));
    let residual = steady_residual(lind, &rho)?;
    Ok(SteadyState { rho, residual, method: SteadyMethod::Dense, iterations: 1 })
}

/// Action used for Hermitian states: the symmetric one when the Lindbladian
/// is translation linked and the caller guarantees invariant inputs.
enum Action {
    Full(LindbladAction),
    Symmetric(SymmetricAction),
}

impl Action {
    fn get(&self) -> &dyn HermitianAction {
        match self {
            Action::Full(a) => a,
            Action::Symmetric(a) => a,
        }
    }

    fn apply_matrix_hermitian(&self, x: &Matrix) -> Matrix {
        let a = self.get();
        let src = x.as_standard_layout();
        let mut out = Matrix::zeros(x.dim());
        let mut scratch = ActionScratch::new(a.n_sites());
        a.apply_hermitian(src.as_slice().expect("contiguous"), out.as_slice_mut().expect("contiguous"), &mut scratch);
        out
    }
}

fn action_for(lind: &TruncatedLindbladian, invariant_input: bool) -> Result<Action> {
    if invariant_input && lind.is_translation_linked() && lind.n_sites() > 1 {
        Ok(Action::Symmetric(SymmetricAction::new(lind)?))
    } else {
        Ok(Action::Full(LindbladAction::new(lind)?))
    }
}

fn initial_state(lind: &TruncatedLindbladian, init: &InitialState) -> Result<(Matrix, bool)> {
    let n = lind.n_sites();
    Ok(match init {
        InitialState::MaximallyMixed => (state::maximally_mixed(n), true),
        InitialState::Gibbs => (gibbs_state(&lind.hamiltonian, lind.beta())?, true),
        InitialState::Custom(m) => {
            if m.dim() != (1 << n, 1 << n) {
                return Err(Error::Shape(format!("initial state {:?} on {n} sites", m.dim())));
            }
            (linalg::hermitize(m), false)
        }
    })
}

fn finalize(rho: Matrix) -> Matrix {
    let h = linalg::hermitize(&rho);
    let tr = linalg::trace(&h).re;
    h.mapv(|z| z / tr)
}

/// Krylov solve on the real packing of Hermitian operators.
pub fn steady_state_gmres(lind: &TruncatedLindbladian, opts: &SteadyOptions) -> Result<SteadyState> {
    let n = lind.n_sites();
    let d = 1usize << n;
    let len = d * d;
    let (rho0, invariant) = initial_state(lind, &opts.initial)?;
    let action = action_for(lind, invariant)?;
    let a = action.get();
    let mut scratch = ActionScratch::new(n);
    let mut cx = kernel::zeros(len);
    let mut cy = kernel::zeros(len);

    let rho0 = rho0.as_standard_layout().into_owned();
    a.apply_hermitian(rho0.as_slice().expect("contiguous"), &mut cy, &mut scratch);
    let mut b = vec![0.0; len];
    pack_hermitian(&cy, d, &mut b);
    b.iter_mut().for_each(|v| *v = -*v);

    let restart = opts.restart.min((opts.krylov_bytes / (8 * len)).max(2));
    // ‖X‖₁ ≤ √d ‖X‖₂, so this 2-norm target implies the trace-norm target
    let gopts = GmresOptions { restart, max_iter: opts.max_iter, tol: 0.5 * opts.tol / (d as f64).sqrt() };
    let mut x = vec![0.0; len];
    let report = gmres(
        |v, out| {
            unpack_hermitian(v, d, &mut cx);
            a.apply_hermitian(&cx, &mut cy, &mut scratch);
            pack_hermitian(&cy, d, out);
        },
        &b,
        &mut x,
        &gopts,
    );
    let iterations = match &report {
        Ok(r) => r.iterations,
        Err(_) => opts.max_iter,
    };
    log::debug!("steady-state GMRES: {:?}", report.as_ref().map(|r| (r.iterations, r.residual)));
    unpack_hermitian(&x, d, &mut cx);
    drop(x);
    drop(b);
    let mut rho = rho0;
    rho.iter_mut().zip(&cx).for_each(|(r, dx)| *r += dx);
    let rho = finalize(rho);
    let residual = linalg::trace_norm(&linalg::hermitize(&action.apply_matrix_hermitian(&rho)))?;
    Ok(SteadyState { rho, residual, method: SteadyMethod::Gmres, iterations })
}

/// Upper bound on `‖𝓛‖` (Frobenius-induced) from the site blocks.
pub fn generator_norm_bound(lind: &TruncatedLindbladian) -> Result<f64> {
    let mut total = 0.0;
    for a in 0..lind.n_sites() {
        let block = lind.site_block(a);
        let mut s = 2.0 * linalg::spectral_norm(&block.k)?;
        for l in &block.jumps {
            s += linalg::spectral_norm(l)?.powi(2);
        }
        total += s;
    }
    Ok(total)
}

/// Integrates `dρ/dt = 𝓛(ρ)` with tenth-order Taylor steps of size
/// `0.5/‖𝓛‖`, checking the residual at geometrically spaced times.
pub fn steady_state_integrate(lind: &TruncatedLindbladian, opts: &SteadyOptions) -> Result<SteadyState> {
    let n = lind.n_sites();
    let d = 1usize << n;
    let (rho0, invariant) = initial_state(lind, &opts.initial)?;
    let action = action_for(lind, invariant)?;
    let a = action.get();
    let dt = 0.5 / generator_norm_bound(lind)?.max(1e-12);
    let mut scratch = ActionScratch::new(n);
    let mut x = rho0.as_standard_layout().into_owned().into_raw_vec();
    let (mut term, mut next) = (Vec::new(), Vec::new());
    let mut res = kernel::zeros(d * d);
    let mut steps = 0usize;
    let mut check_at = 1usize;
    let tol2 = 0.5 * opts.tol / (d as f64).sqrt();
    loop {
        a.taylor_step(&mut x, dt, 10, &mut scratch, &mut term, &mut next);
        steps += 1;
        if steps >= check_at {
            check_at = steps + (steps / 4).max(1);
            a.apply_hermitian(&x, &mut res, &mut scratch);
            let r2 = res.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            if r2 <= tol2 {
                break;
            }
            if steps as f64 * dt > opts.max_time {
                return Err(Error::NoConvergence(format!("integration residual {r2:.3e} at t = {:.1}", steps as f64 * dt)));
            }
        }
    }
    let rho = finalize(Matrix::from_shape_vec((d, d), x).expect("square"));
    let residual = linalg::trace_norm(&linalg::hermitize(&action.apply_matrix_hermitian(&rho)))?;
    Ok(SteadyState { rho, residual, method: SteadyMethod::Integrate, iterations: steps })
}

/// `‖ρ - σ‖₁`.
pub fn trace_distance(rho: &Matrix, sigma: &Matrix) -> Result<f64> {
    linalg::trace_norm(&linalg::hermitize(&(rho - sigma)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dissipator::{build_lindbladian, EnvelopeKind, LindbladianOptions};
    use crate::hamiltonian::{build_model, LocalHamiltonian, Model};
    use crate::lattice::{Boundary, Lattice};
    use crate::linalg::max_abs;

    fn mfi(n: usize) -> LocalHamiltonian {
        build_model(Model::Mfi, &Lattice::chain(n, Boundary::Periodic).unwrap(), &Default::default()).unwrap()
    }

    #[test]
    fn infinite_temperature_fixed_point() {
        let lind = build_lindbladian(&mfi(3), &LindbladianOptions::new(0.0, 1, EnvelopeKind::Gaussian)).unwrap();
        let ss = steady_state(&lind, &SteadyOptions::default()).unwrap();
        assert!(max_abs(&(ss.rho - state::maximally_mixed(3))) < 1e-12);
    }

    #[test]
    fn full_range_truncation_recovers_gibbs() {
        for n in [3, 4, 5] {
            let h = mfi(n);
            let lind = build_lindbladian(&h, &LindbladianOptions::new(1.0, h.lattice().diameter(), EnvelopeKind::Gaussian)).unwrap();
            let ss = steady_state(&lind, &SteadyOptions::default()).unwrap();
            let gibbs = gibbs_state(&h, 1.0).unwrap();
            assert!(trace_distance(&ss.rho, &gibbs).unwrap() <= 1e-6, "n = {n}");
        }
    }

    #[test]
    fn three_routes_agree() {
        let lind = build_lindbladian(&mfi(4), &LindbladianOptions::new(1.0, 1, EnvelopeKind::Gaussian)).unwrap();
        let dense = steady_state_dense(&lind).unwrap();
        let mut opts = SteadyOptions { method: SteadyMethod::Gmres, ..Default::default() };
        let kry = steady_state(&lind, &opts).unwrap();
        opts.method = SteadyMethod::Integrate;
        opts.initial = InitialState::Gibbs;
        let int = steady_state(&lind, &opts).unwrap();
        assert!(dense.residual <= 1e-8 && kry.residual <= 1e-8 && int.residual <= 1e-8);
        assert!(trace_distance(&dense.rho, &kry.rho).unwrap() < 1e-7);
        assert!(trace_distance(&dense.rho, &int.rho).unwrap() < 1e-7);
    }

    #[test]
    fn non_invariant_start_uses_full_action() {
        let lind = build_lindbladian(&mfi(4), &LindbladianOptions::new(0.5, 1, EnvelopeKind::Gaussian)).unwrap();
        let opts = SteadyOptions { method: SteadyMethod::Gmres, initial: InitialState::Custom(state::basis_state(4, 0b0110)), ..Default::default() };
        let ss = steady_state(&lind, &opts).unwrap();
        let dense = steady_state_dense(&lind).unwrap();
        assert!(trace_distance(&dense.rho, &ss.rho).unwrap() < 1e-7);
    }

    #[test]
    fn dense_cap() {
        let lind = build_lindbladian(&mfi(7), &LindbladianOptions::new(0.5, 1, EnvelopeKind::Gaussian)).unwrap();
        assert!(steady_state_dense(&lind).unwrap_err().is_resource_cap());
    }
}
