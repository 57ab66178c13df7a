//! Local detailed-balance Lindbladians for Gibbs-state preparation.
//!
//! Builds strictly local jump operators and coherent terms from truncated
//! Hamiltonian patches, evolves the resulting channel semigroup with
//! (randomized) Trotter product formulas, dilates each local channel into a
//! single-ancilla unitary, compiles that unitary onto a CZ ladder template,
//! and measures the errors introduced at each stage.
//!
//! Conventions used throughout:
//! - site 0 is the most significant bit of every basis index;
//! - a density matrix over `n` qubits is a `2^n x 2^n` row-major `Matrix`;
//! - spin operators are Pauli matrices divided by two;
//! - gadget ancillas sit above the system (most significant bit).

extern crate blas_src;

pub mod compiler;
pub mod dissipator;
pub mod error;
pub mod evolution;
pub mod gadget;
pub mod hamiltonian;
pub mod kernel;
pub mod lattice;
pub mod linalg;
pub mod noise;
pub mod observables;
pub mod pauli;
pub mod rng;
pub mod solver;
pub mod spectral;
pub mod state;

pub use error::{Error, Result};
pub use hamiltonian::{build_model, LocalHamiltonian, Model};
pub use lattice::{Boundary, Lattice, Region};
pub use linalg::{Matrix, C64};
