//! Variational compilation of gadget unitaries onto a CZ-ladder template.

pub mod gadgets;
pub mod loss;
pub mod optimize;
pub mod template;

pub use gadgets::{compile_site_gadgets, CompiledGadgets};
pub use loss::{compilation_loss, phase_aligned_loss, LossEvaluator};
pub use optimize::{adam_step, best_so_far, compile_gadget, optimize, AdamConfig, AdamState, CompileResult, RestartResult};
pub use template::{template_unitary, u_gate, u_gate_derivatives, u_matrix, Circuit, Gate, TemplateShape};
