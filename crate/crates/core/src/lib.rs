//! Lagrangian representations and kinetic diagnostics for scalar
//! conservation laws with polynomial fluxes.

pub mod error;
pub mod flux;
pub mod geometry;
pub mod kinetic;
pub mod lagrangian;
mod mcf;
pub mod poly;
pub mod solver;
pub mod structure;
pub mod transport;

pub use error::{Error, Result};
