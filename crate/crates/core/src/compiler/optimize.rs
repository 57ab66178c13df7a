//! Adam and the multi-restart search.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::rng::stream_rng;

use super::loss::LossEvaluator;
use super::template::TemplateShape;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub iterations: usize,
    pub restarts: usize,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig { learning_rate: 1e-3, beta1: 0.99, beta2: 0.99, epsilon: 1e-3, iterations: 8000, restarts: 50 }
    }
}

impl AdamConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.learning_rate > 0.0
            && (0.0..1.0).contains(&self.beta1)
            && (0.0..1.0).contains(&self.beta2)
            && self.epsilon >= 0.0
            && self.restarts >= 1;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("invalid optimizer settings {self:?}")))
        }
    }
}

/// Moment accumulators of Adam.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u32,
}

impl AdamState {
    pub fn new(n: usize) -> Self {
        AdamState { m: vec![0.0; n], v: vec![0.0; n], t: 0 }
    }
}

/// One bias-corrected Adam update of `x`.
pub fn adam_step(cfg: &AdamConfig, state: &mut AdamState, x: &mut [f64], grad: &[f64]) {
    state.t += 1;
    let c1 = 1.0 - cfg.beta1.powi(state.t as i32);
    let c2 = 1.0 - cfg.beta2.powi(state.t as i32);
    for i in 0..x.len() {
        state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * grad[i];
        state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * grad[i] * grad[i];
        let mh = state.m[i] / c1;
        let vh = state.v[i] / c2;
        x[i] -= cfg.learning_rate * mh / (vh.sqrt() + cfg.epsilon);
    }
}

/// One optimization run.
#[derive(Clone, Debug, Serialize)]
pub struct RestartResult {
    pub restart: usize,
    pub params: Vec<f64>,
    /// Loss before every update, plus the loss after the last one.
    pub trace: Vec<f64>,
    pub final_loss: f64,
    /// Set when a non-finite loss aborted the run.
    pub aborted: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct CompileResult {
    pub best: RestartResult,
    pub restarts: Vec<RestartResult>,
}

impl CompileResult {
    pub fn best_loss(&self) -> f64 {
        self.best.final_loss
    }
}

/// Runs Adam from `params` for `cfg.iterations` steps.
pub fn optimize(eval: &mut LossEvaluator, params: &mut [f64], cfg: &AdamConfig, restart: usize) -> RestartResult {
    let mut state = AdamState::new(params.len());
    let mut grad = vec![0.0; params.len()];
    let mut trace = Vec::with_capacity(cfg.iterations + 1);
    let mut aborted = false;
    for _ in 0..cfg.iterations {
        let loss = eval.loss_and_gradient(params, &mut grad);
        if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            log::warn!("restart {restart}: non-finite loss after {} steps, abandoning", trace.len());
            aborted = true;
            break;
        }
        trace.push(loss);
        adam_step(cfg, &mut state, params, &grad);
    }
    let final_loss = if aborted { f64::INFINITY } else { eval.loss(params) };
    if !aborted {
        trace.push(final_loss);
    }
    RestartResult { restart, params: params.to_vec(), trace, final_loss, aborted }
}

/// Best of `cfg.restarts` Adam runs from uniform random angles in [0, 2π).
/// Restart `i` draws from substream `i` of `seed`.
pub fn compile_gadget(target: &Matrix, shape: &TemplateShape, cfg: &AdamConfig, seed: u64) -> Result<CompileResult> {
    cfg.validate()?;
    let proto = LossEvaluator::new(shape, target)?;
    let n = proto.n_params();
    let runs: Vec<RestartResult> = (0..cfg.restarts)
        .into_par_iter()
        .map_init(
            || LossEvaluator::new(shape, target).expect("validated above"),
            |eval, i| {
                let mut rng = stream_rng(seed, i as u64);
                let mut params: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..std::f64::consts::TAU)).collect();
                optimize(eval, &mut params, cfg, i)
            },
        )
        .collect();
    let best = runs
        .iter()
        .filter(|r| !r.aborted)
        .min_by(|a, b| a.final_loss.total_cmp(&b.final_loss).then(a.restart.cmp(&b.restart)))
        .cloned()
        .ok_or_else(|| Error::NoConvergence("every restart produced a non-finite loss".into()))?;
    Ok(CompileResult { best, restarts: runs })
}

/// Running minimum of a loss trace.
pub fn best_so_far(trace: &[f64]) -> Vec<f64> {
    let mut best = f64::INFINITY;
    trace
        .iter()
        .map(|&x| {
            best = best.min(x);
            best
        })
        .collect()
}
