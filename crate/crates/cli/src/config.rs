//! Experiment configuration: a TOML file with strict key checking.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use locgibbs::compiler::AdamConfig;
use locgibbs::dissipator::{EnvelopeKind, LindbladianOptions};
use locgibbs::evolution::{DrawMode, TrotterPlan};
use locgibbs::{build_model, Boundary, Lattice, LocalHamiltonian, Model};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

/// Axes a sweep may vary.
pub const SWEEP_AXES: [&str; 6] = ["beta", "r", "tau", "t", "p", "modules"];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub seed: u64,
    /// Output directory; `--out` overrides it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    pub model: ModelConfig,
    pub lattice: LatticeConfig,
    #[serde(default)]
    pub lindblad: LindbladConfig,
    #[serde(default)]
    pub evolution: EvolutionConfig,
    #[serde(default)]
    pub gadget: GadgetConfig,
    #[serde(default)]
    pub compile: AdamConfig,
    #[serde(default)]
    pub noise: NoiseConfig,
    #[serde(default)]
    pub observables: ObservablesConfig,
    /// Grid values per axis, at most two axes.
    #[serde(default)]
    pub sweep: BTreeMap<String, Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub name: Model,
    /// Couplings; missing ones take the model defaults.
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeConfig {
    pub extents: Vec<usize>,
    #[serde(default = "periodic")]
    pub boundary: Boundary,
}

fn periodic() -> Boundary {
    Boundary::Periodic
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LindbladConfig {
    pub beta: f64,
    pub r: usize,
    pub envelope: EnvelopeKind,
}

impl Default for LindbladConfig {
    fn default() -> Self {
        LindbladConfig { beta: 1.0, r: 1, envelope: EnvelopeKind::Gaussian }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    Dense,
    Trajectories,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Formula {
    /// One uniformly drawn jump per site and step.
    Randomized,
    /// All jumps of a site at once.
    Deterministic,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialKind {
    MaximallyMixed,
    /// `|0…0⟩`.
    Zero,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvolutionConfig {
    pub tau: f64,
    pub t: f64,
    /// Emit a row every this many steps (the last step is always emitted).
    pub record_every: usize,
    pub backend: BackendKind,
    pub formula: Formula,
    pub n_traj: usize,
    pub draw_mode: DrawMode,
    pub rescale: f64,
    pub initial: InitialKind,
}

impl Default for EvolutionConfig {
    fn default() -> Self {
        EvolutionConfig {
            tau: 0.1,
            t: 1.0,
            record_every: 1,
            backend: BackendKind::Dense,
            formula: Formula::Randomized,
            n_traj: 100,
            draw_mode: DrawMode::PerStep,
            rescale: 3.0,
            initial: InitialKind::MaximallyMixed,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GadgetMode {
    /// Local channels `exp(τ𝓛)` directly.
    None,
    /// Dilation unitaries with the ancilla traced out.
    ExactUnitary,
    /// Dilation unitaries compiled onto the ladder template.
    Compiled,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GadgetConfig {
    pub mode: GadgetMode,
    /// Template modules for compiled gadgets.
    pub modules: usize,
}

impl Default for GadgetConfig {
    fn default() -> Self {
        GadgetConfig { mode: GadgetMode::None, modules: 4 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseConfig {
    pub p: f64,
    /// Measurement shots per Pauli term; 0 uses exact expectations.
    pub shots: usize,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        NoiseConfig { p: 0.0, shots: 0 }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ObservablesConfig {
    /// Largest correlator separation (0 disables correlators).
    pub correlators: usize,
    pub heat_capacity: bool,
}

fn bad(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

impl ExperimentConfig {
    /// Reads a TOML config, or the `config` member of a JSON run manifest.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| bad(format!("cannot read {}: {e}", path.display())))?;
        let cfg: ExperimentConfig = if path.extension().map_or(false, |e| e == "json") {
            let mut v: serde_json::Value = serde_json::from_str(&text).map_err(|e| bad(format!("{}: {e}", path.display())))?;
            let inner = v.get_mut("config").map(|c| c.take()).ok_or_else(|| bad(format!("{} has no `config` member", path.display())))?;
            serde_json::from_value(inner).map_err(|e| bad(format!("{}: {e}", path.display())))?
        } else {
            Self::parse(&text).map_err(|e| bad(format!("{}: {e}", path.display())))?
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn parse(text: &str) -> Result<Self, String> {
        toml::from_str(text).map_err(|e| e.to_string())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// SHA-256 of the canonical TOML form.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_toml().as_bytes()))
    }

    pub fn lattice(&self) -> Result<Lattice, CliError> {
        let dims = self.lattice.extents.len();
        Lattice::new(self.lattice.extents.clone(), vec![self.lattice.boundary; dims]).map_err(|e| bad(e.to_string()))
    }

    pub fn hamiltonian(&self) -> Result<LocalHamiltonian, CliError> {
        let mut params = self.model.name.default_params();
        for (k, v) in &self.model.params {
            if !params.contains_key(k) {
                return Err(bad(format!("model {} has no parameter `{k}`", self.model.name)));
            }
            params.insert(k.clone(), *v);
        }
        build_model(self.model.name, &self.lattice()?, &params).map_err(|e| bad(e.to_string()))
    }

    pub fn lindbladian_options(&self) -> LindbladianOptions {
        LindbladianOptions::new(self.lindblad.beta, self.lindblad.r, self.lindblad.envelope)
    }

    pub fn plan(&self, n_sites: usize) -> Result<TrotterPlan, CliError> {
        let e = &self.evolution;
        let plan = TrotterPlan::for_time(e.t, e.tau, n_sites).map_err(|err| bad(err.to_string()))?;
        Ok(plan.with_draw_mode(e.draw_mode).with_rescale(e.rescale))
    }

    /// Checks every field against the preconditions of the stage that uses it.
    pub fn validate(&self) -> Result<(), CliError> {
        let h = self.hamiltonian()?;
        let l = &self.lindblad;
        if !(l.beta >= 0.0 && l.beta.is_finite()) {
            return Err(bad(format!("beta must be finite and nonnegative, got {}", l.beta)));
        }
        let e = &self.evolution;
        if !(e.tau > 0.0 && e.tau.is_finite()) || !(e.t >= 0.0 && e.t.is_finite()) {
            return Err(bad(format!("need tau > 0 and t >= 0, got tau = {}, t = {}", e.tau, e.t)));
        }
        if e.record_every == 0 {
            return Err(bad("record_every must be at least 1"));
        }
        if e.backend == BackendKind::Trajectories && e.n_traj < 2 {
            return Err(bad("trajectory runs need n_traj >= 2"));
        }
        self.plan(h.n_sites())?;
        if self.gadget.mode == GadgetMode::Compiled && self.gadget.modules == 0 {
            return Err(bad("compiled gadgets need at least one module"));
        }
        if self.gadget.mode != GadgetMode::None && self.evolution.formula == Formula::Deterministic {
            return Err(bad("gadgets realize the randomized formula only"));
        }
        if self.gadget.mode != GadgetMode::None && self.evolution.backend == BackendKind::Dense && e.draw_mode != DrawMode::PerStep {
            return Err(bad("the dense gadget path needs per-step draws"));
        }
        if self.noise.p != 0.0 && self.gadget.mode != GadgetMode::Compiled {
            return Err(bad("gate noise applies to compiled gadgets only"));
        }
        self.compile.validate().map_err(|err| bad(err.to_string()))?;
        locgibbs::noise::DepolarizingModel::new(self.noise.p).map_err(|err| bad(err.to_string()))?;
        if self.observables.correlators >= h.n_sites() {
            return Err(bad(format!("correlator separation {} on {} sites", self.observables.correlators, h.n_sites())));
        }
        if self.sweep.len() > 2 {
            return Err(bad(format!("at most two sweep axes, got {}", self.sweep.len())));
        }
        for (axis, values) in &self.sweep {
            if !SWEEP_AXES.contains(&axis.as_str()) {
                return Err(bad(format!("unknown sweep axis `{axis}` (expected one of {SWEEP_AXES:?})")));
            }
            if matches!(axis.as_str(), "r" | "modules") && values.iter().any(|v| v.fract() != 0.0 || *v < 0.0) {
                return Err(bad(format!("sweep axis `{axis}` takes nonnegative integers")));
            }
        }
        Ok(())
    }

    /// Copy with one sweep coordinate applied.
    pub fn with_axis(&self, axis: &str, value: f64) -> Self {
        let mut c = self.clone();
        match axis {
            "beta" => c.lindblad.beta = value,
            "r" => c.lindblad.r = value as usize,
            "tau" => c.evolution.tau = value,
            "t" => c.evolution.t = value,
            "p" => c.noise.p = value,
            "modules" => c.gadget.modules = value as usize,
            other => unreachable!("axis {other} rejected by validation"),
        }
        c.sweep.clear();
        c
    }
}
