//! The closed-form ansatz `Σ σ_j P U_{δ_j}` evaluated together with a
//! perturbation `w`, written so that nothing of the size of a bubble cancels.

use std::sync::Arc;

use crate::bubbles::{bubble_dderiv, BallDomain, Bubble, TowerConfig};
use crate::constants::{critical_power, to_f64};
use crate::error::{Error, Result};
use crate::radial_core::fem::Discretization;
use crate::radial_core::{norm_h1, RadialField, RadialGrid};
use crate::reduced_energy::profile_energy;

use super::nonlinearity::{f_shift, fprime_shift, nonlinearity_deriv, primitive_taylor_remainder};

/// One signed bubble of the ansatz.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Term {
    pub bubble: Bubble,
    pub sign: f64,
    /// Boundary value `U_δ(R)`.
    pub trace: f64,
}

/// `P U_{δ1}` or `P U_{δ1} - P U_{δ2}`.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Ansatz {
    pub dom: BallDomain,
    pub p: f64,
    pub terms: Vec<Term>,
}

/// Values of the ansatz plus `w` at one radius.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Pointwise {
    /// `u = V + w`.
    pub u: f64,
    /// `Σ σ_j U_j^p - f(u)`.
    pub source: f64,
    /// `f'(u)`.
    pub fprime: f64,
}

impl Ansatz {
    pub fn new(dim: u32, dom: BallDomain, deltas: &[f64]) -> Result<Self> {
        if deltas.is_empty() || deltas.len() > 2 {
            return Err(Error::InvalidParameter(format!("ansatz takes one or two scales, got {}", deltas.len())));
        }
        if deltas.len() == 2 && deltas[1] >= deltas[0] {
            return Err(Error::ConfigurationInvalid(format!(
                "delta2 = {:e} is not below delta1 = {:e}",
                deltas[1], deltas[0]
            )));
        }
        let p = to_f64(critical_power(dim));
        let terms = deltas
            .iter()
            .enumerate()
            .map(|(j, &d)| {
                let bubble = Bubble::new(dim, d)?;
                Ok(Term { bubble, sign: if j == 0 { 1.0 } else { -1.0 }, trace: bubble.power(dom.radius(), 1.0) })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { dom, p, terms })
    }

    pub fn from_config(cfg: &TowerConfig) -> Result<Self> {
        cfg.validate()?;
        let mut deltas = vec![cfg.delta1()];
        if cfg.has_inner() {
            deltas.push(cfg.delta2());
        }
        Self::new(cfg.dim, cfg.domain(), &deltas)
    }

    pub fn dim(&self) -> u32 {
        self.terms[0].bubble.dim()
    }

    pub fn deltas(&self) -> Vec<f64> {
        self.terms.iter().map(|t| t.bubble.delta()).collect()
    }

    pub fn value(&self, r: f64) -> f64 {
        self.terms.iter().map(|t| t.sign * (t.bubble.power(r, 1.0) - t.trace)).sum()
    }

    /// Index of the largest bubble at `r` and `u - σ_j U_j` for every `j`.
    fn split(&self, r: f64, w: f64) -> (usize, [f64; 2], [f64; 2]) {
        let mut u = [0.0; 2];
        let mut pu = [0.0; 2];
        for (j, t) in self.terms.iter().enumerate() {
            u[j] = t.bubble.power(r, 1.0);
            pu[j] = u[j] - t.trace;
        }
        let k = self.terms.len();
        let mut rest = [0.0; 2];
        for j in 0..k {
            // u - σ_j U_j = -σ_j c_j + Σ_{i≠j} σ_i P U_i + w
            let mut a = -self.terms[j].sign * self.terms[j].trace + w;
            for i in 0..k {
                if i != j {
                    a += self.terms[i].sign * pu[i];
                }
            }
            rest[j] = a;
        }
        let dominant = if k == 2 && u[1] > u[0] { 1 } else { 0 };
        (dominant, u, rest)
    }

    pub fn at(&self, r: f64, w: f64) -> Pointwise {
        let p = self.p;
        let (j, u, rest) = self.split(r, w);
        let t = &self.terms[j];
        let uval = t.sign * u[j] + rest[j];
        // f(σU + a) = σ f(U + σa)
        let mut source = -t.sign * f_shift(u[j], t.sign * rest[j], p);
        for (i, o) in self.terms.iter().enumerate() {
            if i != j {
                source += o.sign * o.bubble.power(r, p);
            }
        }
        Pointwise { u: uval, source, fprime: nonlinearity_deriv(uval, p) }
    }

    /// `δ_j ∂/∂δ_j` of `Σ σ_i U_i^p - f(u) - εu` at fixed `w`.
    pub fn log_delta_derivative(&self, r: f64, w: f64, eps: f64, j: usize) -> f64 {
        let p = self.p;
        let (_, u, rest) = self.split(r, w);
        let t = &self.terms[j];
        let uval = t.sign * u[j] + rest[j];
        let fp = nonlinearity_deriv(uval, p);
        // f'(u) - p U_j^{p-1}, which is small where U_j dominates.
        let dj = fprime_shift(u[j], t.sign * rest[j], p);
        let z = bubble_dderiv(r, &t.bubble);
        let z_trace = bubble_dderiv(self.dom.radius(), &t.bubble);
        t.bubble.delta() * t.sign * (-(dj + eps) * z + (fp + eps) * z_trace)
    }

    /// `F(V + w) - F(V) - f(V) w` and `Σ σ_j U_j^p - f(V)` at `r`.
    pub fn energy_terms(&self, r: f64, w: f64) -> (f64, f64) {
        let base = self.at(r, 0.0);
        (primitive_taylor_remainder(base.u, w, self.p), base.source)
    }

    /// `J_ε(V)` by quadrature of closed-form integrands.
    pub fn energy(&self, eps: f64) -> Result<f64> {
        let b = self.terms.iter().map(|t| t.bubble).collect::<Vec<_>>();
        profile_energy(b[0], b.get(1).copied(), self.dom.radius(), eps)
    }

    /// Interpolants of `P Z_j` and their normalized versions.
    pub fn kernels(&self, grid: &Arc<RadialGrid>) -> Vec<RadialField> {
        self.terms
            .iter()
            .map(|t| {
                let c = bubble_dderiv(self.dom.radius(), &t.bubble);
                RadialField::interpolate(grid, &|r: f64| bubble_dderiv(r, &t.bubble) - c, true)
            })
            .collect()
    }

    pub fn unit_kernels(&self, grid: &Arc<RadialGrid>) -> Vec<RadialField> {
        self.kernels(grid).into_iter().map(|z| z.scaled(1.0 / norm_h1(&z))).collect()
    }

    pub fn interpolate(&self, grid: &Arc<RadialGrid>) -> RadialField {
        RadialField::interpolate(grid, &|r: f64| self.value(r), true)
    }

    /// `J_ε(V + w) - J_ε(V)` on the grid of `w`.
    pub fn energy_increment(&self, w: &RadialField, eps: f64) -> f64 {
        let disc = Discretization::new(w.grid().clone());
        let wq = disc.at_quad(w.values());
        let dens: Vec<f64> = disc
            .quad_radii()
            .iter()
            .zip(&wq)
            .map(|(&r, &wv)| {
                let (rem, src) = self.energy_terms(r, wv);
                let v = self.value(r);
                src * wv - rem - eps * v * wv - 0.5 * eps * wv * wv
            })
            .collect();
        0.5 * disc.stiffness_form(w.values(), w.values()) + disc.integrate(&dens)
    }
}
