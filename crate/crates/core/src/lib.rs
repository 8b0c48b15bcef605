//! Linearly edge-reinforced random walks: simulation, the explicit mixing
//! density of the environment, the variational machinery that bounds its
//! quarter moments, and the arithmetic of the resulting hitting bounds on the
//! diluted square lattice.

pub mod acceptance;
pub mod error;
pub mod graph;
pub mod io;
pub mod lattice;
pub mod measure;
pub mod potential;
pub mod quadrature;
pub mod rng;
pub mod sampler;
pub mod trees;
pub mod variational;
pub mod walker;

pub use error::{Error, Result};
pub use graph::{FiniteGraph, InitialWeights};
pub use measure::Environment;
pub use potential::EdgePotential;
