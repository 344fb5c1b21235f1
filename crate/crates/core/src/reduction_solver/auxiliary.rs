//! The two auxiliary equations: `φ1` against `P Z_1`, then `φ2` against both kernels.

use std::sync::Arc;

use crate::bubbles::{BallDomain, TowerConfig};
use crate::error::{Error, Result};
use crate::radial_core::fem::{Discretization, Tridiag};
use crate::radial_core::{norm_h1, RadialField, RadialGrid};
use crate::reduced_energy::bubble_energy_scale;

use super::ansatz::Ansatz;
use super::newton::{newton, BorderedJacobian, BorderedProblem, NewtonOptions, Residual};

/// Result of one or both auxiliary solves.
#[derive(Debug, Clone)]
pub struct AuxiliarySolution {
    pub eps: f64,
    pub d1: f64,
    pub d2: f64,
    pub phi1: RadialField,
    pub phi2: Option<RadialField>,
    pub norm_phi1: f64,
    pub norm_phi2: Option<f64>,
    /// Lagrange multipliers with respect to the H¹-normalized kernels.
    pub multipliers: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Dual H¹ norm of the residual relative to the size of the ansatz.
    pub residual_h1: f64,
}

impl AuxiliarySolution {
    pub fn stage_ratio(&self) -> Option<f64> {
        self.norm_phi2.map(|n2| n2 / self.norm_phi1)
    }

    /// `φ1 + φ2` (or `φ1` alone after the first stage).
    pub fn remainder(&self) -> RadialField {
        match &self.phi2 {
            Some(p2) => self.phi1.axpy(1.0, p2).expect("stages share a grid"),
            None => self.phi1.clone(),
        }
    }

    pub fn require_converged(&self) -> Result<&Self> {
        if self.converged {
            Ok(self)
        } else {
            Err(Error::NewtonDiverged { iterations: self.iterations, residual: self.residual_h1 })
        }
    }
}

/// How the nonlinearity enters a stage solve.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum StageModel {
    Full,
    /// `f` linearized at the ansatz and the ansatz residual removed, so that
    /// zero is the exact solution.
    #[cfg_attr(not(test), allow(dead_code))]
    Homogeneous,
}

pub(crate) struct StageProblem<'a> {
    pub ansatz: &'a Ansatz,
    pub disc: &'a Discretization,
    pub stiffness: Tridiag,
    pub pinned: Tridiag,
    pub eps: f64,
    pub fixed: Vec<f64>,
    /// `K ẑ_k` for every normalized kernel.
    pub kz: Vec<Vec<f64>>,
    pub scale: f64,
    pub model: StageModel,
}

impl<'a> StageProblem<'a> {
    pub fn new(
        ansatz: &'a Ansatz,
        disc: &'a Discretization,
        eps: f64,
        fixed: Vec<f64>,
        kernels: &[RadialField],
        model: StageModel,
    ) -> Self {
        let stiffness = disc.stiffness();
        let mut pinned = stiffness.clone();
        pinned.pin_last();
        let kz = kernels.iter().map(|z| stiffness.mul(z.values())).collect();
        let dim = ansatz.dim();
        let scale = (ansatz.terms.len() as f64 * bubble_energy_scale(dim)).sqrt();
        Self { ansatz, disc, stiffness, pinned, eps, fixed, kz, scale, model }
    }

    fn total(&self, w: &[f64]) -> Vec<f64> {
        self.fixed.iter().zip(w).map(|(a, b)| a + b).collect()
    }

    /// Dual norm `sqrt(Fᵀ K⁻¹ F)` of a load-type vector.
    pub fn dual_norm(&self, f: &[f64]) -> f64 {
        let mut g = f.to_vec();
        *g.last_mut().unwrap() = 0.0;
        let y = self.pinned.solve(&g);
        g.iter().zip(&y).map(|(a, b)| a * b).sum::<f64>().max(0.0).sqrt()
    }
}

impl BorderedProblem for StageProblem<'_> {
    fn residual(&self, w: &[f64], x: &[f64]) -> Residual {
        let t = self.total(w);
        let tq = self.disc.at_quad(&t);
        let g: Vec<f64> = match self.model {
            StageModel::Full => self
                .disc
                .quad_radii()
                .iter()
                .zip(&tq)
                .map(|(&r, &v)| {
                    let pt = self.ansatz.at(r, v);
                    pt.source - self.eps * pt.u
                })
                .collect(),
            StageModel::Homogeneous => self
                .disc
                .quad_radii()
                .iter()
                .zip(&tq)
                .map(|(&r, &v)| -(self.ansatz.at(r, 0.0).fprime + self.eps) * v)
                .collect(),
        };
        let mut field = self.stiffness.mul(&t);
        for (f, l) in field.iter_mut().zip(self.disc.load(&g)) {
            *f += l;
        }
        for (k, kz) in self.kz.iter().enumerate() {
            for (f, z) in field.iter_mut().zip(kz) {
                *f -= x[k] * z;
            }
        }
        let n = field.len();
        field[n - 1] = w[n - 1];
        let side = self.kz.iter().map(|kz| kz.iter().zip(w).map(|(a, b)| a * b).sum()).collect();
        Residual { field, side }
    }

    fn jacobian(&self, w: &[f64], _x: &[f64]) -> BorderedJacobian {
        let t = self.total(w);
        let tq = self.disc.at_quad(&t);
        let c: Vec<f64> = self
            .disc
            .quad_radii()
            .iter()
            .zip(&tq)
            .map(|(&r, &v)| {
                let base = if self.model == StageModel::Full { v } else { 0.0 };
                self.ansatz.at(r, base).fprime + self.eps
            })
            .collect();
        let mut a = self.stiffness.clone();
        a.add_scaled(&self.disc.mass(&c), -1.0);
        BorderedJacobian {
            a,
            cols: self.kz.iter().map(|z| z.iter().map(|v| -v).collect()).collect(),
            rows: self.kz.clone(),
        }
    }

    fn merit(&self, r: &Residual) -> f64 {
        let d = self.dual_norm(&r.field);
        (d * d + r.side.iter().map(|s| s * s).sum::<f64>()).sqrt() / self.scale
    }
}

fn check_grid(grid: &RadialGrid, dim: u32, dom: &BallDomain, delta: f64) -> Result<()> {
    if grid.dim() != dim || (grid.radius() - dom.radius()).abs() > 1e-14 * dom.radius() {
        return Err(Error::GridMismatch);
    }
    let node = grid.smallest_positive();
    if delta < 10.0 * node {
        return Err(Error::MeshUnresolved { scale: delta, node });
    }
    Ok(())
}

pub(crate) fn stage1_with(
    eps: f64,
    d1: f64,
    grid: &Arc<RadialGrid>,
    dom: &BallDomain,
    tol: f64,
    model: StageModel,
    start: Option<&RadialField>,
) -> Result<AuxiliarySolution> {
    let cfg = TowerConfig::single(grid.dim(), dom.radius(), eps, d1)?;
    check_grid(grid, cfg.dim, dom, cfg.delta1())?;
    let ansatz = Ansatz::from_config(&cfg)?;
    let disc = Discretization::new(grid.clone());
    let kernels = ansatz.unit_kernels(grid);
    let n = grid.len();
    let problem = StageProblem::new(&ansatz, &disc, eps, vec![0.0; n], &kernels, model);
    let w0 = start.map_or_else(|| vec![0.0; n], |s| s.values().to_vec());
    let out = newton(&problem, w0, vec![0.0], NewtonOptions { min_iterations: 1, ..NewtonOptions::new(tol) })?;
    let phi1 = RadialField::from_values(grid, out.w, true)?;
    Ok(AuxiliarySolution {
        eps,
        d1,
        d2: 0.0,
        norm_phi1: norm_h1(&phi1),
        phi1,
        phi2: None,
        norm_phi2: None,
        multipliers: out.x,
        iterations: out.iterations,
        converged: out.converged,
        residual_h1: out.merit,
    })
}

/// Solves for `φ1 ⊥ P Z_1` with one multiplier.
pub fn solve_stage1(
    eps: f64,
    d1: f64,
    grid: &Arc<RadialGrid>,
    dom: &BallDomain,
    tol: f64,
) -> Result<AuxiliarySolution> {
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter(format!("tolerance must be positive, got {tol}")));
    }
    stage1_with(eps, d1, grid, dom, tol, StageModel::Full, None)
}

/// Solves for `φ2 ⊥ P Z_1, P Z_2` with `φ1` held fixed and two multipliers.
pub fn solve_stage2(
    eps: f64,
    d1: f64,
    d2: f64,
    phi1: &AuxiliarySolution,
    grid: &Arc<RadialGrid>,
    dom: &BallDomain,
    tol: f64,
) -> Result<AuxiliarySolution> {
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter(format!("tolerance must be positive, got {tol}")));
    }
    let cfg = TowerConfig::new(grid.dim(), dom.radius(), eps, d1, d2)?;
    if !cfg.has_inner() {
        return Err(Error::ConfigurationInvalid("second stage needs d2 > 0".into()));
    }
    cfg.validate()?;
    if phi1.eps != eps || phi1.d1 != d1 {
        return Err(Error::InvalidParameter("first-stage solution belongs to other parameters".into()));
    }
    phi1.require_converged()?;
    if !Arc::ptr_eq(phi1.phi1.grid(), grid) && phi1.phi1.grid().nodes() != grid.nodes() {
        return Err(Error::GridMismatch);
    }
    check_grid(grid, cfg.dim, dom, cfg.delta2())?;
    let ansatz = Ansatz::from_config(&cfg)?;
    let disc = Discretization::new(grid.clone());
    let kernels = ansatz.unit_kernels(grid);
    let n = grid.len();
    let problem = StageProblem::new(&ansatz, &disc, eps, phi1.phi1.values().to_vec(), &kernels, StageModel::Full);
    let out =
        newton(&problem, vec![0.0; n], vec![0.0; 2], NewtonOptions { min_iterations: 1, ..NewtonOptions::new(tol) })?;
    let phi2 = RadialField::from_values(grid, out.w, true)?;
    let norm2 = norm_h1(&phi2);
    Ok(AuxiliarySolution {
        eps,
        d1,
        d2,
        phi1: phi1.phi1.clone(),
        norm_phi1: phi1.norm_phi1,
        phi2: Some(phi2),
        norm_phi2: Some(norm2),
        multipliers: out.x,
        iterations: out.iterations,
        converged: out.converged,
        residual_h1: out.merit,
    })
}
