use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// When the sampled jump index of a site is drawn.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DrawMode {
    /// Fresh draw for every site at every step.
    PerStep,
    /// One draw per site, kept for the whole trajectory.
    PerTrajectory,
}

/// Step size, step count, site order and sampling rules of a product formula.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrotterPlan {
    pub tau: f64,
    pub steps: usize,
    pub site_order: Vec<usize>,
    pub draw_mode: DrawMode,
    /// A sampled term evolves as `exp(rescale · τ 𝓛_{a,α})`.
    pub rescale: f64,
}

impl TrotterPlan {
    /// Ascending site order, per-step draws, rescale 3.
    pub fn new(tau: f64, steps: usize, n_sites: usize) -> Result<Self> {
        let plan = TrotterPlan { tau, steps, site_order: (0..n_sites).collect(), draw_mode: DrawMode::PerStep, rescale: 3.0 };
        plan.validate(n_sites)?;
        Ok(plan)
    }

    /// Plan with `M = round(t/τ)` steps.
    pub fn for_time(t: f64, tau: f64, n_sites: usize) -> Result<Self> {
        if !(tau > 0.0) || !(t >= 0.0) {
            return Err(Error::InvalidParameter(format!("need τ > 0 and t ≥ 0, got τ = {tau}, t = {t}")));
        }
        Self::new(tau, (t / tau).round() as usize, n_sites)
    }

    pub fn with_draw_mode(mut self, mode: DrawMode) -> Self {
        self.draw_mode = mode;
        self
    }

    pub fn with_rescale(mut self, rescale: f64) -> Self {
        self.rescale = rescale;
        self
    }

    pub fn total_time(&self) -> f64 {
        self.tau * self.steps as f64
    }

    pub fn validate(&self, n_sites: usize) -> Result<()> {
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(Error::InvalidParameter(format!("τ must be positive, got {}", self.tau)));
        }
        if !(self.rescale > 0.0 && self.rescale.is_finite()) {
            return Err(Error::InvalidParameter(format!("rescale factor must be positive, got {}", self.rescale)));
        }
        let mut seen = vec![false; n_sites];
        if self.site_order.len() != n_sites || !self.site_order.iter().all(|&s| s < n_sites && !std::mem::replace(&mut seen[s], true)) {
            return Err(Error::InvalidParameter(format!("site order {:?} is not a permutation of {n_sites} sites", self.site_order)));
        }
        Ok(())
    }
}
