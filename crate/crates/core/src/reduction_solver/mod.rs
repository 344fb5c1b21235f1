//! Two-stage auxiliary solves, the reduced energy in `(d1, d2)` and full
//! nonlinear radial solves.

mod ansatz;
mod auxiliary;
mod newton;
pub mod nonlinearity;

pub use auxiliary::{solve_stage1, solve_stage2, AuxiliarySolution};
pub use nonlinearity::{nonlinearity, nonlinearity_deriv};
mod reduced;
pub use reduced::{
    minimize_by_gradient, minimize_reduced, reduced_j, GradientMinimum, ReducedEnergy, ReducedMinimum, SearchBox,
};
mod bvp;
#[cfg(test)]
mod tests;
pub use bvp::{
    fit_concentration, nehari_energy_bound, nehari_residual, nodal_analysis, solve_bvp, sphere_radii, BvpInit,
    BvpSolution, NodalReport, NODAL_DEAD_BAND,
};
