//! Trotterized evolution: deterministic and randomized product formulas on
//! density-matrix and statevector backends, their exact references, and
//! mixing measurements.

pub mod channels;
pub mod exact;
pub mod mixing;
pub mod plan;
pub mod trajectory;

pub use channels::{ChannelKind, ChannelSet, EvolutionScratch, GadgetSet, LocalChannelOp};
pub use exact::{
    deterministic_trotter_evolve, deterministic_trotter_observed, exact_evolve, exact_mean_evolve, exact_mean_observed, exact_semigroup_superop,
    mean_step_superop, run_channel_steps, superop_power, trotter_step_superop,
};
pub use mixing::{mixing_rate_estimate, spectral_gap, MixingReport};
pub use plan::{DrawMode, TrotterPlan};
pub use trajectory::{mean_channel_estimate, sample_trajectory, Backend, MeanEstimate, ObservableFn, TrajectoryKey, TrajectorySampler, TrajectoryState};

#[cfg(test)]
mod tests;
