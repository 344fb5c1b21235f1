//! Numerical laboratory for sign-changing bubble towers of
//! `-Δu = |u|^{p-1} u + ε u` in a ball of `R^N`, `N >= 7`.

pub mod error;
pub mod radial_core;

pub use error::{Error, Result};
pub mod bubbles;
pub mod constants;
pub mod reduced_energy;
pub mod reduction_solver;
