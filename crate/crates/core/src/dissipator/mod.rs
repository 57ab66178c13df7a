//! Envelopes, jump operators and coherent terms, the truncated Lindbladian,
//! Gibbs and detailed-balance checks, and steady states.

pub mod action;
pub mod envelope;
pub mod generator;
pub mod kms;
pub mod steady;
pub mod timedomain;

pub use action::{ActionScratch, HermitianAction, LindbladAction, SymmetricAction};
pub use envelope::{envelope_eval, Envelope, EnvelopeKind};
pub use generator::{
    add_embedded_superop, apply_generator, build_coherent_term, build_jump_operator, build_lindbladian, depolarizing_apply, depolarizing_superop,
    renormalization_factors, renormalize_envelope, BoltzmannWeight, JumpBuilder, JumpScale, LindbladianOptions, LocalGenerator,
    TranslationLink, TruncatedLindbladian,
};
pub use kms::{gibbs_state, gibbs_state_dense, induced_one_norm_bounds, kms_residual, kms_residual_full, local_kms_residuals};
pub use timedomain::{consistency_check, filter_time_domain};
pub use steady::{generator_norm_bound, steady_residual, steady_state, trace_distance, InitialState, SteadyMethod, SteadyOptions, SteadyState};
