//! Self-checks run by `verify`.

use std::time::Instant;

use locgibbs::compiler::{LossEvaluator, TemplateShape};
use locgibbs::dissipator::{
    build_lindbladian, depolarizing_superop, gibbs_state, induced_one_norm_bounds, kms_residual_full, local_kms_residuals, steady_state, trace_distance,
    BoltzmannWeight, EnvelopeKind, InitialState, LindbladianOptions, SteadyMethod, SteadyOptions, TruncatedLindbladian,
};
use locgibbs::evolution::{exact_evolve, exact_mean_evolve, mixing_rate_estimate, TrotterPlan};
use locgibbs::gadget::{channel_distance_lemma1, gadget_unitary, log_log_slope};
use locgibbs::rng::stream_rng;
use locgibbs::{build_model, state, Boundary, Lattice, LocalHamiltonian, Model};
use rand::Rng;

use crate::output::format_value;
use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Level {
    Fast,
    Full,
}

/// One named check: `value` must lie in `[lo, hi]`.
#[derive(Clone, Debug)]
pub struct Check {
    pub name: &'static str,
    pub value: f64,
    pub lo: f64,
    pub hi: f64,
    pub seconds: f64,
}

impl Check {
    pub fn passed(&self) -> bool {
        self.value >= self.lo && self.value <= self.hi
    }
}

struct Suite {
    weight: BoltzmannWeight,
    checks: Vec<Check>,
}

impl Suite {
    fn run(&mut self, name: &'static str, lo: f64, hi: f64, f: impl FnOnce(&Self) -> Result<f64, CliError>) -> Result<(), CliError> {
        let t0 = Instant::now();
        let value = f(self)?;
        let check = Check { name, value, lo, hi, seconds: t0.elapsed().as_secs_f64() };
        log::info!("{} {name} = {value:.3e} in [{lo:e}, {hi:e}] ({:.1} s)", if check.passed() { "pass" } else { "FAIL" }, check.seconds);
        self.checks.push(check);
        Ok(())
    }

    fn lind(&self, h: &LocalHamiltonian, beta: f64, r: usize) -> Result<TruncatedLindbladian, CliError> {
        let opts = LindbladianOptions { weight: self.weight, ..LindbladianOptions::new(beta, r, EnvelopeKind::Gaussian) };
        Ok(build_lindbladian(h, &opts)?)
    }
}

fn mfi(n: usize, boundary: Boundary) -> Result<LocalHamiltonian, CliError> {
    Ok(build_model(Model::Mfi, &Lattice::chain(n, boundary)?, &Model::Mfi.default_params())?)
}

/// Runs the suite. `weight` is a test hook: `Omitted` drops the Boltzmann
/// factor from every jump, which the detailed-balance checks must catch.
pub fn run(level: Level, weight: BoltzmannWeight) -> Result<Vec<Check>, CliError> {
    let mut s = Suite { weight, checks: Vec::new() };
    s.run("kms_full_residual", 0.0, 1e-8, |s| {
        let h = mfi(3, Boundary::Periodic)?;
        let mut worst: f64 = 0.0;
        for beta in [0.2, 0.5, 1.0] {
            worst = worst.max(kms_residual_full(&s.lind(&h, beta, h.lattice().diameter())?)?);
        }
        Ok(worst)
    })?;
    s.run("kms_local_residual", 0.0, 1e-8, |s| {
        let l = s.lind(&mfi(5, Boundary::Periodic)?, 1.0, 1)?;
        Ok(local_kms_residuals(&l)?.into_iter().fold(0.0, f64::max))
    })?;
    s.run("depolarizing_limit", 0.0, 1e-10, |s| {
        let l = s.lind(&mfi(2, Boundary::Open)?, 0.0, 1)?;
        Ok(induced_one_norm_bounds(&(l.superop_full()? - depolarizing_superop(2)?))?.1)
    })?;
    s.run("fixed_point_trace_distance", 0.0, 1e-6, |s| {
        let h = mfi(4, Boundary::Periodic)?;
        let ss = steady_state(&s.lind(&h, 1.0, h.lattice().diameter())?, &SteadyOptions { method: SteadyMethod::Dense, ..SteadyOptions::default() })?;
        Ok(2.0 * trace_distance(&ss.rho, &gibbs_state(&h, 1.0)?)?)
    })?;
    s.run("trotter_exponent", -1.3, -0.7, |s| {
        let l = s.lind(&mfi(2, Boundary::Periodic)?, 1.0, 1)?;
        let rho0 = state::basis_state(2, 0);
        let exact = exact_evolve(&l, &rho0, 2.0)?;
        let ms = [8.0, 16.0, 32.0, 64.0];
        let mut errs = Vec::new();
        for m in ms {
            let plan = TrotterPlan::for_time(2.0, 2.0 / m, 2)?;
            errs.push(trace_distance(&exact_mean_evolve(&l, &rho0, &plan)?, &exact)?);
        }
        Ok(log_log_slope(&ms, &errs))
    })?;
    s.run("gadget_exponent", 1.7, 2.3, |s| {
        let l = s.lind(&mfi(4, Boundary::Periodic)?, 1.0, 1)?;
        let g = &l.site_generators(0)[0];
        let taus: Vec<f64> = (0..5).map(|k| 0.02 * 25f64.powf(k as f64 / 4.0)).collect();
        let errs = taus.iter().map(|&t| channel_distance_lemma1(&g.l, &g.g, t)).collect::<Result<Vec<_>, _>>()?;
        Ok(log_log_slope(&taus, &errs))
    })?;
    s.run("loss_gradient_relative_error", 0.0, 1e-6, |s| {
        let h = mfi(4, Boundary::Open)?;
        let l = s.lind(&h, 1.0, 1)?;
        let g = &l.site_generators(1)[0];
        let shape = TemplateShape::ladder(h.lattice(), g.support.sites(), 1, 2)?;
        let mut eval = LossEvaluator::new(&shape, &gadget_unitary(&g.l, &g.g, 0.3)?)?;
        let mut rng = stream_rng(11, 0);
        let x: Vec<f64> = (0..eval.n_params()).map(|_| rng.gen_range(0.0..std::f64::consts::TAU)).collect();
        let mut grad = vec![0.0; x.len()];
        eval.loss_and_gradient(&x, &mut grad);
        let eps = 1e-5;
        let (mut num, mut den) = (0.0f64, 0.0f64);
        for k in 0..x.len() {
            let (mut xp, mut xm) = (x.clone(), x.clone());
            xp[k] += eps;
            xm[k] -= eps;
            let fd = (eval.loss(&xp) - eval.loss(&xm)) / (2.0 * eps);
            num = num.max((fd - grad[k]).abs());
            den = den.max(grad[k].abs());
        }
        Ok(num / den.max(1e-12))
    })?;
    if level == Level::Full {
        s.run("steady_state_n8_monotone_in_r", 0.0, 1e-9, |s| {
            let h = mfi(8, Boundary::Periodic)?;
            let gibbs = gibbs_state(&h, 1.0)?;
            let mut dists = Vec::new();
            for r in 1..=3 {
                let opts = SteadyOptions { method: SteadyMethod::Gmres, initial: InitialState::Gibbs, ..SteadyOptions::default() };
                let ss = steady_state(&s.lind(&h, 1.0, r)?, &opts)?;
                dists.push(2.0 * trace_distance(&ss.rho, &gibbs)?);
            }
            log::info!("n = 8 steady-state distances for r = 1, 2, 3: {dists:?}");
            Ok(dists.windows(2).map(|w| (w[1] - w[0]).max(0.0)).fold(0.0, f64::max))
        })?;
        s.run("depolarizing_decay_rate", 0.99, 1.01, |s| {
            let l = s.lind(&mfi(1, Boundary::Open)?, 0.0, 0)?;
            let pair = (state::basis_state(1, 0), state::basis_state(1, 1));
            let grid: Vec<f64> = (0..=20).map(|k| 0.25 * k as f64).collect();
            Ok(mixing_rate_estimate(&l, &[pair], &grid)?.rate)
        })?;
    }
    Ok(s.checks)
}

pub const COLUMNS: [&str; 6] = ["check", "value", "lo", "hi", "passed", "seconds"];

pub fn records(checks: &[Check]) -> Vec<Vec<String>> {
    checks
        .iter()
        .map(|c| vec![c.name.to_string(), format_value(c.value), format_value(c.lo), format_value(c.hi), c.passed().to_string(), format!("{:.3}", c.seconds)])
        .collect()
}
