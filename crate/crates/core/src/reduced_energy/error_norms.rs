//! H¹ norms of the two error terms driving the auxiliary equations.

use std::sync::Arc;

use crate::bubbles::{projected_z, BallDomain, Bubble, TowerConfig};
use crate::constants::DimensionalConstants;
use crate::error::{Error, Result};
use crate::radial_core::fem::Discretization;
use crate::radial_core::{
    integrate_strict, inverse_laplacian_load, norm_h1, project_orthogonal, sphere_area, QuadOptions, RadialField,
    RadialGrid,
};
use crate::reduction_solver::nonlinearity::{f_shift, nonlinearity};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorTerm {
    R1,
    R2,
}

impl ErrorTerm {
    pub fn label(self) -> &'static str {
        match self {
            ErrorTerm::R1 => "r1",
            ErrorTerm::R2 => "r2",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorNormReport {
    pub eps: f64,
    pub norm_projected: f64,
    pub norm_unprojected: f64,
    pub which: ErrorTerm,
}

impl ErrorNormReport {
    pub fn to_record(&self) -> Vec<(&'static str, f64)> {
        vec![("eps", self.eps), ("norm_projected", self.norm_projected), ("norm_unprojected", self.norm_unprojected)]
    }
}

fn check_grid(grid: &RadialGrid, dom: &BallDomain, consts: &DimensionalConstants) -> Result<()> {
    if grid.dim() != consts.dim || (grid.radius() - dom.radius()).abs() > 1e-14 * dom.radius() {
        return Err(Error::GridMismatch);
    }
    Ok(())
}

fn z_basis(grid: &Arc<RadialGrid>, bubbles: &[Bubble], dom: &BallDomain) -> Vec<RadialField> {
    bubbles.iter().map(|b| RadialField::interpolate(grid, &|r: f64| projected_z(r, b, dom), true)).collect()
}

fn report(
    eps: f64,
    grid: &Arc<RadialGrid>,
    source: impl Fn(f64) -> f64,
    basis: &[RadialField],
    which: ErrorTerm,
) -> Result<ErrorNormReport> {
    let disc = Discretization::new(grid.clone());
    let g = disc.sample(source);
    let w = inverse_laplacian_load(&disc, disc.load(&g));
    let norm_unprojected = norm_h1(&w);
    let norm_projected = norm_h1(&project_orthogonal(&w, basis)?);
    Ok(ErrorNormReport { eps, norm_projected, norm_unprojected, which })
}

/// `‖P U_{δ1} - i*[f(P U_{δ1}) + ε P U_{δ1}]‖`, with and without the `P Z_1` component.
pub fn error_norm_r1(
    eps: f64,
    d1: f64,
    consts: &DimensionalConstants,
    dom: &BallDomain,
    grid: &Arc<RadialGrid>,
) -> Result<ErrorNormReport> {
    check_grid(grid, dom, consts)?;
    let cfg = TowerConfig::single(consts.dim, dom.radius(), eps, d1)?;
    let b1 = cfg.outer();
    let c1 = b1.power(dom.radius(), 1.0);
    let p = consts.p;
    // P U = i*(U^p), so the residual is i* of `U^p - f(P U) - ε P U`.
    let source = |r: f64| {
        let u1 = b1.power(r, 1.0);
        -f_shift(u1, -c1, p) - eps * (u1 - c1)
    };
    report(eps, grid, source, &z_basis(grid, &[b1], dom), ErrorTerm::R1)
}

/// Right side `g` of the second error term, written so that no large terms cancel.
fn r2_source(r: f64, b1: &Bubble, b2: &Bubble, c1: f64, c2: f64, p: f64, eps: f64) -> f64 {
    let (u1, u2) = (b1.power(r, 1.0), b2.power(r, 1.0));
    let (pu1, pu2) = (u1 - c1, u2 - c2);
    let q = if pu2.abs() <= pu1.abs() {
        f_shift(pu1, -pu2, p) + b2.power(r, p)
    } else {
        -f_shift(u2, -c2, p) - f_shift(pu2, -pu1, p) - nonlinearity(pu1, p)
    };
    -q + eps * pu2
}

fn tower_bubbles(eps: f64, d1: f64, d2: f64, consts: &DimensionalConstants, dom: &BallDomain) -> Result<TowerConfig> {
    let cfg = TowerConfig::new(consts.dim, dom.radius(), eps, d1, d2)?;
    if !cfg.has_inner() {
        return Err(Error::ConfigurationInvalid("second error term needs d2 > 0".into()));
    }
    cfg.validate()?;
    Ok(cfg)
}

/// `‖-P U_{δ2} - i*[f(V) - f(P U_{δ1}) - ε P U_{δ2}]‖`, with and without the
/// `P Z_1`, `P Z_2` components.
pub fn error_norm_r2(
    eps: f64,
    d1: f64,
    d2: f64,
    consts: &DimensionalConstants,
    dom: &BallDomain,
    grid: &Arc<RadialGrid>,
) -> Result<ErrorNormReport> {
    check_grid(grid, dom, consts)?;
    let cfg = tower_bubbles(eps, d1, d2, consts, dom)?;
    let smallest = grid.smallest_positive();
    if cfg.delta2() < 10.0 * smallest {
        return Err(Error::MeshUnresolved { scale: cfg.delta2(), node: smallest });
    }
    let (b1, b2) = (cfg.outer(), cfg.inner().expect("inner bubble present"));
    let (c1, c2) = (b1.power(dom.radius(), 1.0), b2.power(dom.radius(), 1.0));
    let p = consts.p;
    let source = |r: f64| r2_source(r, &b1, &b2, c1, c2, p, eps);
    report(eps, grid, source, &z_basis(grid, &[b1, b2], dom), ErrorTerm::R2)
}

/// Mesh-free upper bound `S^{-1/2} |g|_{2N/(N+2)}` for the unprojected second error term.
pub fn error_norm_r2_surrogate(
    eps: f64,
    d1: f64,
    d2: f64,
    consts: &DimensionalConstants,
    dom: &BallDomain,
) -> Result<f64> {
    let cfg = tower_bubbles(eps, d1, d2, consts, dom)?;
    let (b1, b2) = (cfg.outer(), cfg.inner().expect("inner bubble present"));
    let (c1, c2) = (b1.power(dom.radius(), 1.0), b2.power(dom.radius(), 1.0));
    let p = consts.p;
    let n = consts.dim as f64;
    let q = 2.0 * n / (n + 2.0);
    let n1 = consts.dim as i32 - 1;
    let (d1s, d2s) = (cfg.delta1(), cfg.delta2());
    let bps: Vec<f64> = [d2s, (d1s * d2s).sqrt(), d1s].into_iter().filter(|&x| x < dom.radius()).collect();
    // Normalize by the size of g at the inner scale so the absolute floor is meaningful.
    let scale = r2_source(d2s, &b1, &b2, c1, c2, p, eps).abs().powf(q) * d2s.powi(consts.dim as i32);
    let integral = integrate_strict(
        |r| r2_source(r, &b1, &b2, c1, c2, p, eps).abs().powf(q) * r.powi(n1),
        0.0,
        dom.radius(),
        &bps,
        QuadOptions { rel_tol: 1e-8, abs_tol: 1e-14 * scale, max_intervals: 20_000 },
    )?;
    Ok((sphere_area(consts.dim) * integral).powf(1.0 / q) / consts.sobolev_s.sqrt())
}
