//! Chemotactic kinetic model with an internal state: kinetic grid solver, the limiting
//! velocity-jump model, a particle simulator and the diagnostics that compare them.

pub mod config;
pub mod diagnostics;
pub mod error;
pub mod fokker_planck;
pub mod grid;
pub mod grid_solver;
pub mod harness;
pub mod kernels;
pub mod limit_solver;
pub mod particles;
pub mod plot;
pub mod quadrature;
pub mod signal;
pub mod snapshot;
pub mod transport;
pub mod velocity;

pub use error::{Error, Result};
