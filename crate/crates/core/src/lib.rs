//! Numerical laboratory for one-dimensional area laws.
//!
//! Gapped nearest-neighbour chains are diagonalized exactly, and every
//! object of the constructive proof (filtered Hamiltonian pieces,
//! approximate ground-state projectors, Schmidt tails, entropy bounds and
//! the expander-graph counterexample states) is built and measured.

pub mod agsp;
pub mod bounds;
pub mod entanglement;
pub mod error;
pub mod experiment;
pub mod export;
pub mod lattice;
pub mod linalg;
pub mod locality;
pub mod mps;
pub mod propagator;
pub mod quadrature;
pub mod spectral;

pub use error::{Error, Result};
