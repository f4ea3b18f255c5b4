//! Correlated-sampling quantum-classical AFQMC.
//!
//! The crate is organised bottom-up: [`chem`] builds Gaussian integrals,
//! [`scf`] produces RHF orbitals, [`hamiltonian`] moves to the MO basis and
//! factorizes the two-electron tensor, [`fci`] is the exact oracle, [`trial`]
//! holds the pair-CC trial states, [`afqmc`] propagates walkers and
//! [`corrsamp`] runs the synchronized ±δ legs that give forces.

pub mod afqmc;
pub mod alignment;
pub mod chem;
pub mod corrsamp;
pub mod error;
pub mod fci;
pub mod hamiltonian;
pub mod linalg;
pub mod pipeline;
pub mod rng;
pub mod scf;
pub mod trial;

pub use error::{Error, Result};
