//! Time-series runs (`evolve`) and grids of them (`sweep`).

use std::sync::Arc;

use locgibbs::compiler::compile_site_gadgets;
use locgibbs::dissipator::{build_lindbladian, gibbs_state, TruncatedLindbladian};
use locgibbs::evolution::{
    deterministic_trotter_observed, exact_mean_observed, run_channel_steps, Backend, ChannelKind, ChannelSet, TrajectoryKey, TrajectorySampler,
    TrajectoryState, TrotterPlan,
};
use locgibbs::gadget::gadget_channel;
use locgibbs::noise::{noisy_mean_evolve, noisy_trajectory_run, DepolarizingModel, InitialVector};
use locgibbs::observables::{energy, energy_moments_vector, heat_capacity, heat_capacity_pauli, jackknife};
use locgibbs::pauli::{Pauli, PauliString, PauliWord};
use locgibbs::rng::stream_rng;
use locgibbs::{state, LocalHamiltonian, Matrix, C64};
use rand::Rng;
use rayon::prelude::*;

use crate::config::{BackendKind, ExperimentConfig, Formula, GadgetMode, InitialKind};
use crate::output::Table;
use crate::CliError;

/// Above this size the heat capacity uses the Pauli expansion of `H²`
/// instead of a dense product.
const DENSE_H2_MAX_SITES: usize = 8;

/// Seed family for the initial basis states of statevector trajectories,
/// apart from the draw and measurement substreams of each trajectory key.
const INIT_FAMILY: u64 = 0x696e_6974_0000_0000;

pub struct Context {
    pub cfg: ExperimentConfig,
    pub h: LocalHamiltonian,
    pub lind: TruncatedLindbladian,
    pub plan: TrotterPlan,
    /// `tr(ρ_β H)`.
    pub reference: f64,
    pairs: Vec<(usize, usize)>,
}

impl Context {
    pub fn new(cfg: &ExperimentConfig) -> Result<Self, CliError> {
        let h = cfg.hamiltonian()?;
        let n = h.n_sites();
        let lind = build_lindbladian(&h, &cfg.lindbladian_options())?;
        let plan = cfg.plan(n)?;
        let reference = energy(&gibbs_state(&h, cfg.lindblad.beta)?, &h)?;
        let pairs = locgibbs::observables::correlator_pairs(n, cfg.observables.correlators);
        Ok(Context { cfg: cfg.clone(), h, lind, plan, reference, pairs })
    }

    fn n(&self) -> usize {
        self.h.n_sites()
    }

    fn record_step(&self, m: usize) -> bool {
        m % self.cfg.evolution.record_every == 0 || m == self.plan.steps
    }

    /// Exact row for a density matrix.
    fn density_row(&self, m: usize, rho: &Matrix) -> Result<Vec<f64>, CliError> {
        let n = self.n() as f64;
        let e = energy(rho, &self.h)?;
        let mut row = vec![m as f64 * self.plan.tau, e / n, 0.0, (e - self.reference).abs() / n, 0.0];
        for &(a, b) in &self.pairs {
            row.push(locgibbs::observables::two_point_correlator(rho, a, b)?);
            row.push(0.0);
        }
        if self.cfg.observables.heat_capacity {
            let beta = self.cfg.lindblad.beta;
            let c = if self.n() <= DENSE_H2_MAX_SITES { heat_capacity(rho, &self.h, beta)? } else { heat_capacity_pauli(rho, &self.h, beta)? };
            row.push(c);
            row.push(0.0);
        }
        Ok(row)
    }

    fn z_words(&self) -> Vec<(PauliWord, PauliWord, PauliWord)> {
        let n = self.n();
        let z = |a: usize| PauliString::new(1.0, &[(a, Pauli::Z)]).word(n);
        self.pairs.iter().map(|&(a, b)| (z(a), z(b), PauliString::new(1.0, &[(a, Pauli::Z), (b, Pauli::Z)]).word(n))).collect()
    }

    /// Per-trajectory sample `[e, e², (z_a, z_b, z_a z_b) per pair]`.
    fn sample(&self, st: &TrajectoryState, words: &[(PauliWord, PauliWord, PauliWord)]) -> Vec<f64> {
        let mut s = match st {
            TrajectoryState::Vector(psi) => energy_moments_vector(&self.h, psi),
            TrajectoryState::Density(rho) => {
                let e = energy(rho, &self.h).expect("matching size");
                vec![e, heat_capacity_pauli(rho, &self.h, 1.0).expect("matching size") + e * e]
            }
        };
        let ev = |w: &PauliWord| match st {
            TrajectoryState::Vector(psi) => w.expectation_vector(psi).re,
            TrajectoryState::Density(rho) => w.trace_with(rho).re,
        };
        for (za, zb, zz) in words {
            s.extend([ev(za), ev(zb), ev(zz)]);
        }
        s
    }

    fn trajectory_row(&self, m: usize, samples: &[Vec<f64>]) -> Result<Vec<f64>, CliError> {
        let n = self.n() as f64;
        let e = jackknife(samples, |v| v[0])?;
        let mut row = vec![m as f64 * self.plan.tau, e.value / n, e.std_error / n, (e.value - self.reference).abs() / n, e.std_error / n];
        for k in 0..self.pairs.len() {
            let j = 2 + 3 * k;
            let c = jackknife(samples, |v| 0.25 * (v[j + 2] - v[j] * v[j + 1]))?;
            row.extend([c.value, c.std_error]);
        }
        if self.cfg.observables.heat_capacity {
            let beta = self.cfg.lindblad.beta;
            let c = jackknife(samples, |v| beta * beta * (v[1] - v[0] * v[0]))?;
            row.extend([c.value, c.std_error]);
        }
        Ok(row)
    }

    fn initial_density(&self) -> Matrix {
        match self.cfg.evolution.initial {
            InitialKind::MaximallyMixed => state::maximally_mixed(self.n()),
            InitialKind::Zero => state::basis_state(self.n(), 0),
        }
    }

    /// Local channels of the exact dilation gadgets, one per site and jump.
    fn gadget_channels(&self) -> Result<Vec<Vec<(Arc<Matrix>, Vec<usize>)>>, CliError> {
        let time = self.plan.rescale * self.plan.tau;
        let mut built: Vec<Option<Arc<Matrix>>> = Vec::with_capacity(self.lind.generators.len());
        let mut out = vec![Vec::new(); self.n()];
        for g in &self.lind.generators {
            let entry = match &g.link {
                Some(link) => (built[link.reference].clone().expect("reference precedes its translates"), link.ordered_support.clone()),
                None => (Arc::new(gadget_channel(&g.l, &g.g, time)?.superop()), g.support.sites().to_vec()),
            };
            built.push(Some(entry.0.clone()));
            out[g.site].push(entry);
        }
        Ok(out)
    }
}

/// Runs one configuration and returns its time series.
pub fn evolve(cfg: &ExperimentConfig) -> Result<Table, CliError> {
    let ctx = Context::new(cfg)?;
    let mut table = Table::new(series_columns(cfg));
    match (cfg.evolution.backend, cfg.gadget.mode) {
        (BackendKind::Dense, mode) => {
            let mut err = None;
            let mut observe = |m: usize, rho: &Matrix| {
                if err.is_none() && ctx.record_step(m) {
                    match ctx.density_row(m, rho) {
                        Ok(row) => table.push(row),
                        Err(e) => err = Some(e),
                    }
                }
            };
            let rho0 = ctx.initial_density();
            match (mode, cfg.evolution.formula) {
                (GadgetMode::None, Formula::Deterministic) => {
                    deterministic_trotter_observed(&ctx.lind, &rho0, &ctx.plan, &mut observe)?;
                }
                (GadgetMode::None, Formula::Randomized) => {
                    exact_mean_observed(&ctx.lind, &rho0, &ctx.plan, &mut observe)?;
                }
                (GadgetMode::ExactUnitary, _) => {
                    let channels = ChannelSet::from_local(ctx.n(), ctx.plan.tau, ChannelKind::Mean { rescale: ctx.plan.rescale }, ctx.gadget_channels()?)?;
                    run_channel_steps(&channels, rho0, &ctx.plan, &mut observe);
                }
                (GadgetMode::Compiled, _) => {
                    let compiled = compile_site_gadgets(&ctx.lind, ctx.plan.rescale * ctx.plan.tau, cfg.gadget.modules, &cfg.compile, cfg.seed)?;
                    noisy_mean_evolve(&compiled, &DepolarizingModel::new(cfg.noise.p)?, &rho0, &ctx.plan, &mut observe)?;
                }
            }
            if let Some(e) = err {
                return Err(e);
            }
        }
        (BackendKind::Trajectories, GadgetMode::Compiled) => {
            if !ctx.pairs.is_empty() || cfg.observables.heat_capacity {
                return Err(CliError::Config("compiled trajectory runs estimate the energy only".into()));
            }
            let compiled = compile_site_gadgets(&ctx.lind, ctx.plan.rescale * ctx.plan.tau, cfg.gadget.modules, &cfg.compile, cfg.seed)?;
            let init = match cfg.evolution.initial {
                InitialKind::MaximallyMixed => InitialVector::RandomBasis,
                InitialKind::Zero => InitialVector::Fixed(basis_vector(ctx.n(), 0)),
            };
            let est = noisy_trajectory_run(
                &compiled,
                &DepolarizingModel::new(cfg.noise.p)?,
                &ctx.plan,
                &init,
                ctx.h.terms(),
                cfg.evolution.n_traj,
                cfg.noise.shots,
                cfg.seed,
            )?;
            let n = ctx.n() as f64;
            let se = est.std_error / n;
            table.push(vec![ctx.plan.total_time(), est.mean / n, se, (est.mean - ctx.reference).abs() / n, se]);
        }
        (BackendKind::Trajectories, mode) => {
            if cfg.evolution.formula == Formula::Deterministic {
                return Err(CliError::Config("trajectories sample the randomized formula".into()));
            }
            let backend = if mode == GadgetMode::ExactUnitary { Backend::Statevector } else { Backend::Density };
            let sampler = TrajectorySampler::new(&ctx.lind, &ctx.plan, backend)?;
            let words = ctx.z_words();
            let recorded: Vec<usize> = (0..=ctx.plan.steps).filter(|&m| ctx.record_step(m)).collect();
            let per_traj: Vec<Vec<Vec<f64>>> = (0..cfg.evolution.n_traj)
                .into_par_iter()
                .map(|i| -> Result<Vec<Vec<f64>>, CliError> {
                    let init = match (backend, cfg.evolution.initial) {
                        (Backend::Density, _) => TrajectoryState::Density(ctx.initial_density()),
                        (Backend::Statevector, InitialKind::Zero) => TrajectoryState::Vector(basis_vector(ctx.n(), 0)),
                        (Backend::Statevector, InitialKind::MaximallyMixed) => {
                            let mut rng = stream_rng(cfg.seed ^ INIT_FAMILY, i as u64);
                            TrajectoryState::Vector(basis_vector(ctx.n(), rng.gen_range(0..1usize << ctx.n())))
                        }
                    };
                    let mut rows = Vec::with_capacity(recorded.len());
                    sampler.run_observed(&init, TrajectoryKey::new(cfg.seed, i as u64), |m, st| {
                        if ctx.record_step(m) {
                            rows.push(ctx.sample(st, &words));
                        }
                    })?;
                    Ok(rows)
                })
                .collect::<Result<_, _>>()?;
            for (k, &m) in recorded.iter().enumerate() {
                let samples: Vec<Vec<f64>> = per_traj.iter().map(|rows| rows[k].clone()).collect();
                table.push(ctx.trajectory_row(m, &samples)?);
            }
        }
    }
    Ok(table)
}

fn basis_vector(n: usize, b: usize) -> Vec<C64> {
    let mut v = vec![C64::new(0.0, 0.0); 1 << n];
    v[b] = C64::new(1.0, 0.0);
    v
}

/// Cartesian product of the sweep axes, points run in parallel. Each point
/// contributes its whole time series, prefixed by the axis values.
pub fn sweep(cfg: &ExperimentConfig) -> Result<Table, CliError> {
    let axes: Vec<(&String, &Vec<f64>)> = cfg.sweep.iter().collect();
    let mut points: Vec<Vec<f64>> = vec![Vec::new()];
    for (_, values) in &axes {
        points = points.iter().flat_map(|p| values.iter().map(move |v| p.iter().copied().chain([*v]).collect())).collect();
    }
    let mut columns: Vec<String> = axes.iter().map(|(a, _)| a.to_string()).collect();
    columns.extend(series_columns(cfg));
    let mut table = Table::new(columns);
    if axes.is_empty() {
        return Ok(table);
    }
    let series: Vec<(Vec<f64>, Table)> = points
        .par_iter()
        .map(|p| -> Result<(Vec<f64>, Table), CliError> {
            let mut point = cfg.clone();
            for ((axis, _), v) in axes.iter().zip(p) {
                point = point.with_axis(axis, *v);
            }
            point.validate()?;
            Ok((p.clone(), evolve(&point)?))
        })
        .collect::<Result<_, _>>()?;
    for (p, t) in series {
        for r in t.rows {
            table.push(p.iter().copied().chain(r).collect());
        }
    }
    Ok(table)
}

/// Time-series columns for a configuration.
pub fn series_columns(cfg: &ExperimentConfig) -> Vec<String> {
    let mut c: Vec<String> = ["t", "E", "E_se", "dE", "dE_se"].iter().map(|s| s.to_string()).collect();
    for l in 1..=cfg.observables.correlators {
        c.push(format!("corr_{l}"));
        c.push(format!("corr_{l}_se"));
    }
    if cfg.observables.heat_capacity {
        c.push("C".into());
        c.push("C_se".into());
    }
    c
}
