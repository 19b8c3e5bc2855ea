//! Deposition-evaporation surface growth and its encoding into two-dimensional
//! super-area-law quantum states.

pub mod entanglement;
pub mod error;
pub mod exact;
pub mod experiment;
pub mod hamiltonian;
pub mod lanczos;
pub mod lattice;
pub mod model;
pub mod numeric;
pub mod scaling;
pub mod seqgen;

pub use error::{DecodeError, Error, Result};
