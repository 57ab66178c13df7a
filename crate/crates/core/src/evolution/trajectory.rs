//! Randomized trajectories and their Monte-Carlo mean.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dissipator::TruncatedLindbladian;
use crate::error::{Error, Result};
use crate::linalg::{Matrix, C64, ZERO};
use crate::rng::{stream_rng, StreamRng};
use crate::state;

use super::channels::{self, ChannelKind, ChannelSet, EvolutionScratch, GadgetSet};
use super::plan::{DrawMode, TrotterPlan};

/// Trajectories are split into this many chunks regardless of thread count,
/// so the reduction order (and every bit of the result) is fixed.
const MEAN_CHUNKS: usize = 64;

/// Statevector runs accumulate the mean density matrix up to this size.
pub const VECTOR_MEAN_STATE_MAX_SITES: usize = 10;

/// Identifies one trajectory: draws come from substream `2·index` of `seed`,
/// ancilla measurements from substream `2·index + 1`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrajectoryKey {
    pub seed: u64,
    pub index: u64,
}

impl TrajectoryKey {
    pub fn new(seed: u64, index: u64) -> Self {
        TrajectoryKey { seed, index }
    }

    fn draw_rng(&self) -> StreamRng {
        stream_rng(self.seed, 2 * self.index)
    }

    fn measure_rng(&self) -> StreamRng {
        stream_rng(self.seed, 2 * self.index + 1)
    }

    /// The term index α ∈ {0, 1, 2} of every site at every step
    /// (one row per step; a single row in per-trajectory mode).
    pub fn draws(&self, n_sites: usize, plan: &TrotterPlan) -> Vec<Vec<usize>> {
        let mut rng = self.draw_rng();
        let rows = match plan.draw_mode {
            DrawMode::PerStep => plan.steps,
            DrawMode::PerTrajectory => 1,
        };
        (0..rows).map(|_| (0..n_sites).map(|_| rng.gen_range(0..3)).collect()).collect()
    }
}

/// State carried along a trajectory.
#[derive(Clone, Debug, PartialEq)]
pub enum TrajectoryState {
    Density(Matrix),
    Vector(Vec<C64>),
}

impl TrajectoryState {
    pub fn n_sites(&self) -> usize {
        let d = match self {
            TrajectoryState::Density(m) => m.nrows(),
            TrajectoryState::Vector(v) => v.len(),
        };
        d.trailing_zeros() as usize
    }

    pub fn density(&self) -> Matrix {
        match self {
            TrajectoryState::Density(m) => m.clone(),
            TrajectoryState::Vector(v) => state::pure_state(v),
        }
    }
}

/// Backend used for randomized trajectories.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    /// Exact local channels on the density matrix.
    Density,
    /// Gadget unitaries on `n + 1` qubits with ancilla measurement and reset.
    Statevector,
}

/// Prebuilt local channels for repeated trajectory sampling.
pub struct TrajectorySampler {
    n: usize,
    plan: TrotterPlan,
    backend: Backend,
    channels: Option<ChannelSet>,
    gadgets: Option<GadgetSet>,
}

impl TrajectorySampler {
    pub fn new(lind: &TruncatedLindbladian, plan: &TrotterPlan, backend: Backend) -> Result<Self> {
        let n = lind.n_sites();
        plan.validate(n)?;
        let (channels, gadgets) = match backend {
            Backend::Density => (Some(ChannelSet::new(lind, plan.tau, ChannelKind::Sampled { rescale: plan.rescale })?), None),
            Backend::Statevector => (None, Some(GadgetSet::new(lind, plan.tau, plan.rescale)?)),
        };
        Ok(TrajectorySampler { n, plan: plan.clone(), backend, channels, gadgets })
    }

    pub fn backend(&self) -> Backend {
        self.backend
    }

    pub fn plan(&self) -> &TrotterPlan {
        &self.plan
    }

    /// Runs one trajectory from `init`.
    pub fn run(&self, init: &TrajectoryState, key: TrajectoryKey) -> Result<TrajectoryState> {
        self.run_observed(init, key, |_, _| {})
    }

    /// Runs one trajectory, calling `observe(step, state)` after every step
    /// and once before the first.
    pub fn run_observed<F: FnMut(usize, &TrajectoryState)>(&self, init: &TrajectoryState, key: TrajectoryKey, mut observe: F) -> Result<TrajectoryState> {
        if init.n_sites() != self.n {
            return Err(Error::Shape(format!("initial state on {} sites, generator on {}", init.n_sites(), self.n)));
        }
        let draws = key.draws(self.n, &self.plan);
        let row = |m: usize| -> &[usize] {
            match self.plan.draw_mode {
                DrawMode::PerStep => &draws[m],
                DrawMode::PerTrajectory => &draws[0],
            }
        };
        match (self.backend, init) {
            (Backend::Density, TrajectoryState::Density(rho0)) => {
                let channels = self.channels.as_ref().expect("density backend");
                let mut st = TrajectoryState::Density(rho0.as_standard_layout().into_owned());
                let mut scratch = EvolutionScratch::new();
                observe(0, &st);
                for m in 0..self.plan.steps {
                    if let TrajectoryState::Density(rho) = &mut st {
                        channels.step(rho, &self.plan.site_order, Some(row(m)), &mut scratch);
                    }
                    observe(m + 1, &st);
                }
                Ok(st)
            }
            (Backend::Statevector, TrajectoryState::Vector(psi0)) => {
                let gadgets = self.gadgets.as_ref().expect("statevector backend");
                let mut rng = key.measure_rng();
                let mut full = channels::with_ancilla(psi0);
                observe(0, init);
                for m in 0..self.plan.steps {
                    let alphas = row(m);
                    for &a in &self.plan.site_order {
                        gadgets.apply(&mut full, a, alphas[a], rng.gen::<f64>());
                    }
                    observe(m + 1, &TrajectoryState::Vector(channels::without_ancilla(&full)));
                }
                Ok(TrajectoryState::Vector(channels::without_ancilla(&full)))
            }
            _ => Err(Error::InvalidParameter(format!("{:?} backend cannot evolve this initial state", self.backend))),
        }
    }
}

/// Evolves one trajectory (building the local channels on the fly).
pub fn sample_trajectory(lind: &TruncatedLindbladian, init: &TrajectoryState, plan: &TrotterPlan, key: TrajectoryKey) -> Result<TrajectoryState> {
    let backend = match init {
        TrajectoryState::Density(_) => Backend::Density,
        TrajectoryState::Vector(_) => Backend::Statevector,
    };
    TrajectorySampler::new(lind, plan, backend)?.run(init, key)
}

/// Monte-Carlo mean over trajectories.
#[derive(Clone, Debug)]
pub struct MeanEstimate {
    /// Mean final state (absent for statevector runs above
    /// `VECTOR_MEAN_STATE_MAX_SITES`).
    pub state: Option<Matrix>,
    /// Mean of every observable at every recorded step: `means[k][j]` is
    /// observable `j` after step `record_steps[k]`.
    pub means: Vec<Vec<f64>>,
    pub std_errors: Vec<Vec<f64>>,
    pub record_steps: Vec<usize>,
    pub n_traj: usize,
}

impl MeanEstimate {
    pub fn final_means(&self) -> &[f64] {
        self.means.last().map_or(&[], |v| v.as_slice())
    }

    pub fn final_std_errors(&self) -> &[f64] {
        self.std_errors.last().map_or(&[], |v| v.as_slice())
    }
}

/// Observables evaluated on trajectory states.
pub type ObservableFn<'a> = dyn Fn(&TrajectoryState) -> Vec<f64> + Sync + 'a;

struct Partial {
    state: Option<Vec<C64>>,
    sum: Vec<Vec<f64>>,
    sum_sq: Vec<Vec<f64>>,
}

/// Averages `n_traj` trajectories with keys `(seed, 0..n_traj)`.
///
/// `observables` is evaluated after each step listed in `record_steps`
/// (the final step if empty). Result is independent of thread count.
pub fn mean_channel_estimate(
    sampler: &TrajectorySampler,
    init: &TrajectoryState,
    n_traj: usize,
    seed: u64,
    observables: &ObservableFn<'_>,
    record_steps: &[usize],
) -> Result<MeanEstimate> {
    if n_traj == 0 {
        return Err(Error::InvalidParameter("n_traj must be at least 1".into()));
    }
    let steps = sampler.plan().steps;
    let record: Vec<usize> = if record_steps.is_empty() { vec![steps] } else { record_steps.to_vec() };
    if record.iter().any(|&s| s > steps) {
        return Err(Error::InvalidParameter(format!("record step beyond plan length {steps}")));
    }
    let n = init.n_sites();
    let keep_state = match init {
        TrajectoryState::Density(_) => true,
        TrajectoryState::Vector(_) => n <= VECTOR_MEAN_STATE_MAX_SITES,
    };
    let chunks = MEAN_CHUNKS.min(n_traj);
    let partials: Vec<Result<Partial>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let lo = c * n_traj / chunks;
            let hi = (c + 1) * n_traj / chunks;
            let mut p = Partial { state: None, sum: vec![Vec::new(); record.len()], sum_sq: vec![Vec::new(); record.len()] };
            for i in lo..hi {
                let mut observed: Vec<Option<Vec<f64>>> = vec![None; record.len()];
                let fin = sampler.run_observed(init, TrajectoryKey::new(seed, i as u64), |m, st| {
                    for (k, &s) in record.iter().enumerate() {
                        if s == m {
                            observed[k] = Some(observables(st));
                        }
                    }
                })?;
                for (k, vals) in observed.into_iter().enumerate() {
                    let vals = vals.expect("every recorded step is visited");
                    if p.sum[k].is_empty() {
                        p.sum[k] = vec![0.0; vals.len()];
                        p.sum_sq[k] = vec![0.0; vals.len()];
                    }
                    for (j, v) in vals.iter().enumerate() {
                        p.sum[k][j] += v;
                        p.sum_sq[k][j] += v * v;
                    }
                }
                if keep_state {
                    let acc = p.state.get_or_insert_with(|| vec![ZERO; 1 << (2 * n)]);
                    match &fin {
                        TrajectoryState::Density(m) => acc.iter_mut().zip(m.iter()).for_each(|(a, b)| *a += b),
                        TrajectoryState::Vector(v) => {
                            let d = v.len();
                            for r in 0..d {
                                for s in 0..d {
                                    acc[r * d + s] += v[r] * v[s].conj();
                                }
                            }
                        }
                    }
                }
            }
            Ok(p)
        })
        .collect();

    let mut state_sum: Option<Vec<C64>> = None;
    let mut sum: Vec<Vec<f64>> = vec![Vec::new(); record.len()];
    let mut sum_sq: Vec<Vec<f64>> = vec![Vec::new(); record.len()];
    for p in partials {
        let p = p?;
        if let Some(s) = p.state {
            match &mut state_sum {
                Some(acc) => acc.iter_mut().zip(&s).for_each(|(a, b)| *a += b),
                None => state_sum = Some(s),
            }
        }
        for k in 0..record.len() {
            if sum[k].is_empty() {
                sum[k] = vec![0.0; p.sum[k].len()];
                sum_sq[k] = vec![0.0; p.sum[k].len()];
            }
            for j in 0..p.sum[k].len() {
                sum[k][j] += p.sum[k][j];
                sum_sq[k][j] += p.sum_sq[k][j];
            }
        }
    }
    let nt = n_traj as f64;
    let means: Vec<Vec<f64>> = sum.iter().map(|s| s.iter().map(|v| v / nt).collect()).collect();
    let std_errors = sum_sq
        .iter()
        .zip(&means)
        .map(|(sq, mu)| {
            sq.iter()
                .zip(mu)
                .map(|(s2, m)| if n_traj > 1 { ((s2 / nt - m * m).max(0.0) * nt / (nt - 1.0) / nt).sqrt() } else { f64::NAN })
                .collect()
        })
        .collect();
    let d = 1usize << n;
    let state = state_sum.map(|s| Matrix::from_shape_vec((d, d), s.into_iter().map(|z| z / nt).collect()).expect("square"));
    Ok(MeanEstimate { state, means, std_errors, record_steps: record, n_traj })
}
