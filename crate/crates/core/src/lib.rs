//! Non-local phase-transition energy with surfactant.
//!
//! The crate discretizes the functional
//! `(1/ε)∫W(u) + ε∫∫J_ε(y−x)(|u(y)−u(x)|/ε)² + ε∫(∫J_ε(y−x)|u(y)−u(x)|/ε dy − ρ)²`
//! on rectangular grids, minimizes it under box and mass constraints, solves
//! the periodic-strip cell problem giving the surface tension `σ(e, γ)`, and
//! evaluates the sharp-interface limit together with recovery-sequence
//! experiments that check the diffuse energies converge to it.

pub mod error;
pub mod fields;
pub mod energy;
pub mod optimize;
pub mod cell;
pub mod sharp;
pub mod gamma;
pub mod io;
pub mod config;
pub mod selftest;

pub use error::{Error, Result};
