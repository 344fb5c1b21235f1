//! Radial meshes, quadrature, Sobolev norms and the inverse radial Laplacian.

pub mod fem;
mod field;
mod grid;
mod quadrature;

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

pub use field::{RadialField, RadialFunction};
pub use grid::{build_grid, Grading, RadialGrid, MIN_GRADED_NODES};
pub use quadrature::{integrate_radial, integrate_radial_with, integrate_strict, QuadOptions, QuadratureResult};

use crate::error::{Error, Result};
use fem::Discretization;

/// Area of the unit sphere in `R^dim`, i.e. `dim * |B_1|`.
pub fn sphere_area(dim: u32) -> f64 {
    let half = dim as f64 / 2.0;
    2.0 * (half * std::f64::consts::PI.ln() - statrs::function::gamma::ln_gamma(half)).exp()
}

/// Volume of the unit ball in `R^dim`.
pub fn ball_volume(dim: u32) -> f64 {
    sphere_area(dim) / dim as f64
}

/// `(|S^{N-1}| ∫_lo^hi |f|^q r^{N-1} dr)^{1/q}`.
pub fn norm_lq<F: RadialFunction + ?Sized>(f: &F, q: f64, lo: f64, hi: f64, dim: u32) -> Result<f64> {
    if q < 1.0 {
        return Err(Error::InvalidParameter(format!("q must be >= 1, got {q}")));
    }
    let n1 = dim as i32 - 1;
    let bps = f.breakpoints();
    let opts = QuadOptions { rel_tol: 1e-10, abs_tol: 0.0, max_intervals: 4000 + 2 * bps.len() };
    let r = integrate_radial_with(|r| f.value(r).abs().powf(q) * r.powi(n1), lo, hi, &bps, opts)?;
    Ok((sphere_area(dim) * r.value).powf(1.0 / q))
}

/// H¹₀ inner product `|S^{N-1}| ∫ u' v' r^{N-1} dr`, exact for piecewise-linear fields.
pub fn inner_h1(u: &RadialField, v: &RadialField) -> Result<f64> {
    if !u.same_grid(v) {
        return Err(Error::GridMismatch);
    }
    let disc = Discretization::new(u.grid().clone());
    Ok(disc.stiffness_form(u.values(), v.values()))
}

pub fn norm_h1(u: &RadialField) -> f64 {
    let disc = Discretization::new(u.grid().clone());
    disc.stiffness_form(u.values(), u.values()).max(0.0).sqrt()
}

/// Galerkin solution `w` of `-Δw = g` in the ball with `w(R) = 0`.
pub fn inverse_laplacian<F: RadialFunction + ?Sized>(g: &F, grid: &Arc<RadialGrid>) -> RadialField {
    let disc = Discretization::new(grid.clone());
    let gq = disc.sample(|r| g.value(r));
    inverse_laplacian_load(&disc, disc.load(&gq))
}

/// Solves `K w = load` with the Dirichlet condition at `R`.
pub fn inverse_laplacian_load(disc: &Discretization, mut load: Vec<f64>) -> RadialField {
    let mut k = disc.stiffness();
    k.pin_last();
    *load.last_mut().unwrap() = 0.0;
    let w = k.solve(&load);
    RadialField::from_values(disc.grid(), w, true).expect("solution has grid length")
}

/// Gram condition number above which a basis is rejected.
pub const GRAM_CONDITION_LIMIT: f64 = 1e12;

/// Removes from `f` its H¹ projection onto `span(basis)`.
pub fn project_orthogonal(f: &RadialField, basis: &[RadialField]) -> Result<RadialField> {
    if basis.is_empty() {
        return Ok(f.clone());
    }
    if basis.iter().any(|b| !b.same_grid(f)) {
        return Err(Error::GridMismatch);
    }
    let disc = Discretization::new(f.grid().clone());
    let k = basis.len();
    let mut gram = DMatrix::zeros(k, k);
    for i in 0..k {
        for j in 0..=i {
            let g = disc.stiffness_form(basis[i].values(), basis[j].values());
            gram[(i, j)] = g;
            gram[(j, i)] = g;
        }
    }
    let scale = DVector::from_iterator(k, (0..k).map(|i| gram[(i, i)].sqrt()));
    if scale.iter().any(|s| !(*s > 0.0)) {
        return Err(Error::DegenerateBasis(f64::INFINITY));
    }
    let normalized = DMatrix::from_fn(k, k, |i, j| gram[(i, j)] / (scale[i] * scale[j]));
    let eig = normalized.clone().symmetric_eigen().eigenvalues;
    let (lo, hi) = eig.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &e| (lo.min(e), hi.max(e)));
    let cond = if lo > 0.0 { hi / lo } else { f64::INFINITY };
    if cond > GRAM_CONDITION_LIMIT {
        return Err(Error::DegenerateBasis(cond));
    }
    let chol = normalized.cholesky().ok_or(Error::DegenerateBasis(cond))?;
    let mut out = f.values().to_vec();
    // Two passes: the second removes what rounding left behind in the first.
    for _ in 0..2 {
        let rhs = DVector::from_iterator(k, (0..k).map(|i| disc.stiffness_form(basis[i].values(), &out) / scale[i]));
        let coef = chol.solve(&rhs);
        for (i, b) in basis.iter().enumerate() {
            let c = coef[i] / scale[i];
            for (o, bv) in out.iter_mut().zip(b.values()) {
                *o -= c * bv;
            }
        }
    }
    RadialField::from_values(f.grid(), out, f.is_dirichlet() && basis.iter().all(|b| b.is_dirichlet()))
}
