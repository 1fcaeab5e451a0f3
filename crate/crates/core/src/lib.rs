//! Numerical laboratory for pathway interference and which-way information in
//! weak-field coherent control.
//!
//! The crate models a three-level molecule (ground state, two bound excited
//! levels, a discretized dissociative continuum with arrangement channels)
//! driven either by classical Gaussian pulses or by quantized multimode light,
//! and measures how much of the two-pathway interference survives once the
//! light field can record which pathway was taken. A separate auditor treats
//! the analogous question for bimolecular collisions with an on-shell
//! S-matrix.
//!
//! Conventions: ħ = ε₀ = V = 1, energies and angular frequencies share units.
//!
//! Modules:
//! - [`fock`]: truncated multimode Fock space and the standard light states.
//! - [`measures`]: indistinguishability, interference power and their bound.
//! - [`molecule`]: level structure and dipoles.
//! - [`classical_control`]: two-pulse control with classical fields.
//! - [`quantum_control`]: the same scheme with quantized fields.
//! - [`incoherent_control`]: the ω₁+ω₂ vs ω₂+ω₁ two-photon scheme.
//! - [`collision`]: the collision coherence auditor.
//! - [`cli`]: the `cohctl` scenario runner.

pub mod classical_control;
pub mod cli;
pub mod collision;
pub mod fock;
pub mod incoherent_control;
pub mod linalg;
pub mod measures;
pub mod molecule;
pub mod quantum_control;

pub use num_complex::Complex64;
