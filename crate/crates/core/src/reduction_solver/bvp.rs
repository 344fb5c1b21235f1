//! Full nonlinear solves of `-Δu = |u|^{p-1}u + εu`, `u = 0` on the sphere,
//! and the diagnostics of their solutions.

use std::sync::Arc;

use crate::bubbles::BallDomain;
use crate::constants::{alpha1, alpha2, bubble_amplitude, critical_power, to_f64};
use crate::error::{Error, Result};
use crate::radial_core::fem::{Discretization, Tridiag};
use crate::radial_core::{RadialField, RadialFunction, RadialGrid};
use crate::reduced_energy::{bubble_energy_scale, functional_j};

use super::ansatz::Ansatz;
use super::newton::{newton, BorderedJacobian, BorderedProblem, NewtonOptions, Residual};
use super::nonlinearity::{nonlinearity, nonlinearity_deriv};

/// Starting point of [`solve_bvp`].
#[derive(Debug, Clone)]
pub enum BvpInit {
    /// Newton on the nodal values, starting from this field.
    Field(RadialField),
    /// Newton on `u = Σ σ_j P U_{δ_j} + w` with the scales as unknowns and
    /// `w` kept H¹-orthogonal to the starting kernels.
    Ansatz { deltas: Vec<f64>, remainder: Option<RadialField> },
}

#[derive(Debug, Clone)]
pub struct BvpSolution {
    pub eps: f64,
    pub u: RadialField,
    /// First sign change of `u` going outward, if any.
    pub nodal_radius: Option<f64>,
    pub energy: f64,
    pub nehari_residual: f64,
    pub fitted_delta1: Option<f64>,
    pub fitted_delta2: Option<f64>,
    pub newton_iterations: usize,
    pub converged: bool,
    /// Dual H¹ norm of the residual relative to the H¹ norm of one bubble.
    pub residual_h1: f64,
    /// Scales of the ansatz at convergence (empty for nodal solves).
    pub deltas: Vec<f64>,
    /// `u` minus the ansatz (nodal solves: `None`).
    pub remainder: Option<RadialField>,
}

impl BvpSolution {
    pub fn require_converged(&self) -> Result<&Self> {
        if self.converged {
            Ok(self)
        } else {
            Err(Error::NewtonDiverged { iterations: self.newton_iterations, residual: self.residual_h1 })
        }
    }
}

fn pinned_dual_norm(pinned: &Tridiag, f: &[f64]) -> f64 {
    let mut g = f.to_vec();
    *g.last_mut().unwrap() = 0.0;
    let y = pinned.solve(&g);
    g.iter().zip(&y).map(|(a, b)| a * b).sum::<f64>().max(0.0).sqrt()
}

struct NodalProblem<'a> {
    disc: &'a Discretization,
    stiffness: Tridiag,
    pinned: Tridiag,
    eps: f64,
    p: f64,
    scale: f64,
}

impl BorderedProblem for NodalProblem<'_> {
    fn residual(&self, u: &[f64], _x: &[f64]) -> Residual {
        let uq = self.disc.at_quad(u);
        let g: Vec<f64> = uq.iter().map(|&v| -(nonlinearity(v, self.p) + self.eps * v)).collect();
        let mut field = self.stiffness.mul(u);
        for (f, l) in field.iter_mut().zip(self.disc.load(&g)) {
            *f += l;
        }
        let n = field.len();
        field[n - 1] = u[n - 1];
        Residual { field, side: Vec::new() }
    }

    fn jacobian(&self, u: &[f64], _x: &[f64]) -> BorderedJacobian {
        let uq = self.disc.at_quad(u);
        let c: Vec<f64> = uq.iter().map(|&v| nonlinearity_deriv(v, self.p) + self.eps).collect();
        let mut a = self.stiffness.clone();
        a.add_scaled(&self.disc.mass(&c), -1.0);
        BorderedJacobian { a, cols: Vec::new(), rows: Vec::new() }
    }

    fn merit(&self, r: &Residual) -> f64 {
        pinned_dual_norm(&self.pinned, &r.field) / self.scale
    }
}

struct AnsatzProblem<'a> {
    disc: &'a Discretization,
    dom: BallDomain,
    stiffness: Tridiag,
    pinned: Tridiag,
    eps: f64,
    base: Vec<f64>,
    /// `K ẑ_k` for the kernels of the starting ansatz.
    kz: Vec<Vec<f64>>,
    scale: f64,
}

impl AnsatzProblem<'_> {
    fn ansatz(&self, x: &[f64]) -> Option<Ansatz> {
        let deltas: Vec<f64> = self.base.iter().zip(x).map(|(d, s)| d * s.exp()).collect();
        Ansatz::new(self.disc.grid().dim(), self.dom, &deltas).ok()
    }
}

impl BorderedProblem for AnsatzProblem<'_> {
    fn residual(&self, w: &[f64], x: &[f64]) -> Residual {
        let n = w.len();
        let Some(ansatz) = self.ansatz(x) else {
            return Residual { field: vec![f64::NAN; n], side: vec![f64::NAN; x.len()] };
        };
        let wq = self.disc.at_quad(w);
        let g: Vec<f64> = self
            .disc
            .quad_radii()
            .iter()
            .zip(&wq)
            .map(|(&r, &v)| {
                let pt = ansatz.at(r, v);
                pt.source - self.eps * pt.u
            })
            .collect();
        let mut field = self.stiffness.mul(w);
        for (f, l) in field.iter_mut().zip(self.disc.load(&g)) {
            *f += l;
        }
        field[n - 1] = w[n - 1];
        let side = self.kz.iter().map(|kz| kz.iter().zip(w).map(|(a, b)| a * b).sum()).collect();
        Residual { field, side }
    }

    fn jacobian(&self, w: &[f64], x: &[f64]) -> BorderedJacobian {
        let ansatz = self.ansatz(x).expect("iterate was accepted with a valid ansatz");
        let wq = self.disc.at_quad(w);
        let radii = self.disc.quad_radii();
        let c: Vec<f64> = radii.iter().zip(&wq).map(|(&r, &v)| ansatz.at(r, v).fprime + self.eps).collect();
        let mut a = self.stiffness.clone();
        a.add_scaled(&self.disc.mass(&c), -1.0);
        let cols = (0..x.len())
            .map(|j| {
                let g: Vec<f64> =
                    radii.iter().zip(&wq).map(|(&r, &v)| ansatz.log_delta_derivative(r, v, self.eps, j)).collect();
                self.disc.load(&g)
            })
            .collect();
        BorderedJacobian { a, cols, rows: self.kz.clone() }
    }

    fn merit(&self, r: &Residual) -> f64 {
        let d = pinned_dual_norm(&self.pinned, &r.field);
        (d * d + r.side.iter().map(|s| s * s).sum::<f64>()).sqrt() / self.scale
    }
}

/// `|‖u‖² - |u|_{p+1}^{p+1} - ε|u|_2²| / ‖u‖²` for a piecewise-linear field.
pub fn nehari_residual(u: &RadialField, eps: f64) -> f64 {
    let disc = Discretization::new(u.grid().clone());
    let p = to_f64(critical_power(u.grid().dim()));
    let uq = disc.at_quad(u.values());
    let grad = disc.stiffness_form(u.values(), u.values());
    let pot: Vec<f64> = uq.iter().map(|&v| nonlinearity(v, p) * v + eps * v * v).collect();
    if grad == 0.0 {
        return 0.0;
    }
    (grad - disc.integrate(&pot)).abs() / grad
}

/// Nehari residual of `V + w` without forming products of bubble-sized terms.
fn ansatz_nehari(ansatz: &Ansatz, w: &RadialField, eps: f64) -> f64 {
    let disc = Discretization::new(w.grid().clone());
    let wq = disc.at_quad(w.values());
    let kww = disc.stiffness_form(w.values(), w.values());
    let mut vv = 0.0;
    let mut vw = 0.0;
    let mut action = 0.0;
    for ((&r, &wv), &qw) in disc.quad_radii().iter().zip(&wq).zip(disc.quad_weights()) {
        let v = ansatz.value(r);
        let pt = ansatz.at(r, wv);
        // -ΔV = Σ σ_j U_j^p
        let lap_v = pt.source + nonlinearity(pt.u, ansatz.p);
        vv += qw * lap_v * v;
        vw += qw * lap_v * wv;
        action += qw * (pt.source - eps * pt.u) * pt.u;
    }
    let norm2 = vv + 2.0 * vw + kww;
    (action + vw + kww).abs() / norm2
}

pub(crate) fn nodal_crossing(u: &RadialField) -> Option<f64> {
    let signs = dead_band_signs(u.values());
    let nodes = u.grid().nodes();
    let mut last: Option<(usize, i8)> = None;
    for (i, &s) in signs.iter().enumerate() {
        if s == 0 {
            continue;
        }
        if let Some((j, t)) = last {
            if t != s {
                let (a, b) = (u.values()[j], u.values()[i]);
                return Some(nodes[j] + (nodes[i] - nodes[j]) * a / (a - b));
            }
        }
        last = Some((i, s));
    }
    None
}

/// Relative size below which a nodal value counts as zero.
pub const NODAL_DEAD_BAND: f64 = 1e-10;

/// Signs of nodal values, with values below `NODAL_DEAD_BAND` times the
/// largest magnitude at or beyond the node counted as zero.
fn dead_band_signs(values: &[f64]) -> Vec<i8> {
    let mut out = vec![0i8; values.len()];
    let mut outer_max = 0.0f64;
    for i in (0..values.len()).rev() {
        outer_max = outer_max.max(values[i].abs());
        let v = values[i];
        out[i] = if v.abs() <= NODAL_DEAD_BAND * outer_max || v == 0.0 {
            0
        } else if v > 0.0 {
            1
        } else {
            -1
        };
    }
    out
}

fn finish(
    eps: f64,
    u: RadialField,
    energy: f64,
    nehari: f64,
    iterations: usize,
    converged: bool,
    residual: f64,
    deltas: Vec<f64>,
    remainder: Option<RadialField>,
) -> BvpSolution {
    let mut sol = BvpSolution {
        eps,
        nodal_radius: nodal_crossing(&u),
        u,
        energy,
        nehari_residual: nehari,
        fitted_delta1: None,
        fitted_delta2: None,
        newton_iterations: iterations,
        converged,
        residual_h1: residual,
        deltas,
        remainder,
    };
    if converged {
        if sol.nodal_radius.is_some() {
            if let Ok((d1, d2)) = fit_concentration(&sol) {
                sol.fitted_delta1 = Some(d1);
                sol.fitted_delta2 = Some(d2);
            }
        } else if sol.u.sup_norm() > 0.0 {
            sol.fitted_delta1 = fit_single(&sol.u).ok();
        }
    }
    sol
}

/// Damped Newton solve of the radial problem on `grid`.
pub fn solve_bvp(eps: f64, init: BvpInit, grid: &Arc<RadialGrid>, tol: f64) -> Result<BvpSolution> {
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter(format!("tolerance must be positive, got {tol}")));
    }
    if !(eps >= 0.0) {
        return Err(Error::InvalidParameter(format!("eps must be non-negative, got {eps}")));
    }
    let dim = grid.dim();
    let dom = BallDomain::new(grid.radius())?;
    let disc = Discretization::new(grid.clone());
    let stiffness = disc.stiffness();
    let mut pinned = stiffness.clone();
    pinned.pin_last();
    let scale = bubble_energy_scale(dim).sqrt();
    let opts = NewtonOptions::new(tol);
    match init {
        BvpInit::Field(u0) => {
            if !u0.is_dirichlet() || u0.grid().nodes() != grid.nodes() {
                return Err(Error::GridMismatch);
            }
            let p = to_f64(critical_power(dim));
            let problem = NodalProblem { disc: &disc, stiffness, pinned, eps, p, scale };
            let out = newton(&problem, u0.values().to_vec(), Vec::new(), opts)?;
            let u = RadialField::from_values(grid, out.w, true)?;
            let energy = functional_j(&u, eps);
            let nehari = nehari_residual(&u, eps);
            Ok(finish(eps, u, energy, nehari, out.iterations, out.converged, out.merit, Vec::new(), None))
        }
        BvpInit::Ansatz { deltas, remainder } => {
            let start = Ansatz::new(dim, dom, &deltas)?;
            let smallest = grid.smallest_positive();
            if let Some(&d) = deltas.iter().find(|&&d| d < 10.0 * smallest) {
                return Err(Error::MeshUnresolved { scale: d, node: smallest });
            }
            let kz = start.unit_kernels(grid).iter().map(|z| stiffness.mul(z.values())).collect();
            let problem = AnsatzProblem { disc: &disc, dom, stiffness, pinned, eps, base: deltas.clone(), kz, scale };
            let w0 = match remainder {
                Some(w) if w.grid().nodes() == grid.nodes() => w.values().to_vec(),
                Some(_) => return Err(Error::GridMismatch),
                None => vec![0.0; grid.len()],
            };
            let out = newton(&problem, w0, vec![0.0; deltas.len()], opts)?;
            let ansatz = problem
                .ansatz(&out.x)
                .ok_or_else(|| Error::ConfigurationInvalid("scales of the converged ansatz are out of order".into()))?;
            let w = RadialField::from_values(grid, out.w, true)?;
            let v = ansatz.interpolate(grid);
            let u = v.axpy(1.0, &w)?;
            let energy = ansatz.energy(eps)? + ansatz.energy_increment(&w, eps);
            let nehari = ansatz_nehari(&ansatz, &w, eps);
            Ok(finish(eps, u, energy, nehari, out.iterations, out.converged, out.merit, ansatz.deltas(), Some(w)))
        }
    }
}

/// Sign of `u` on the two spheres separating the nodal regions of a tower.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NodalReport {
    pub nodal_domain_count: usize,
    pub sign_at_sphere1: i8,
    pub sign_at_sphere2: i8,
    pub inner_negative: bool,
}

/// Radii `ε^{α1}` and `ε^{α2}` of the two spheres.
pub fn sphere_radii(dim: u32, eps: f64) -> Result<(f64, f64)> {
    Ok((eps.powf(to_f64(alpha1(dim)?)), eps.powf(to_f64(alpha2(dim)?))))
}

pub fn nodal_analysis(sol: &BvpSolution, eps: f64) -> Result<NodalReport> {
    let grid = sol.u.grid();
    let (r1, r2) = sphere_radii(grid.dim(), eps)?;
    if r1 >= grid.radius() {
        return Err(Error::RadiusOutsideDomain { radius: r1, domain: grid.radius() });
    }
    let signs = dead_band_signs(sol.u.values());
    let nonzero: Vec<i8> = signs.iter().copied().filter(|&s| s != 0).collect();
    let nodal_domain_count =
        if nonzero.is_empty() { 0 } else { 1 + nonzero.windows(2).filter(|w| w[0] != w[1]).count() };
    let sign_at = |r: f64| {
        let v = sol.u.value(r);
        let i = grid.locate(r);
        let outer = sol.u.values()[i..].iter().fold(0.0f64, |m, x| m.max(x.abs()));
        if v.abs() <= NODAL_DEAD_BAND * outer || v == 0.0 {
            0
        } else if v > 0.0 {
            1
        } else {
            -1
        }
    };
    Ok(NodalReport {
        nodal_domain_count,
        sign_at_sphere1: sign_at(r1),
        sign_at_sphere2: sign_at(r2),
        inner_negative: sol.u.values()[0] < 0.0,
    })
}

/// `J_ε(u) < 3 J_ε(u_positive)`.
pub fn nehari_energy_bound(u: &BvpSolution, u_positive: &BvpSolution) -> bool {
    u.energy < 3.0 * u_positive.energy
}

/// Nodes used by the fits: everything but the boundary node.
fn fit_nodes(u: &RadialField) -> (&[f64], &[f64]) {
    let n = u.grid().len();
    (&u.grid().nodes()[..n - 1], &u.values()[..n - 1])
}

/// Gauss-Newton in `log δ` on relative residuals `(u - V)/(|P U_1| + |P U_2|)`.
fn gauss_newton(nodes: &[f64], values: &[f64], dom: BallDomain, dim: u32, mut deltas: Vec<f64>) -> Result<Vec<f64>> {
    let m = deltas.len();
    for _ in 0..100 {
        let ansatz = Ansatz::new(dim, dom, &deltas).map_err(|e| Error::FitDegenerate(e.to_string()))?;
        let mut jtj = nalgebra::DMatrix::<f64>::zeros(m, m);
        let mut jtr = nalgebra::DVector::<f64>::zeros(m);
        for (&r, &u) in nodes.iter().zip(values) {
            let parts: Vec<f64> = ansatz.terms.iter().map(|t| (t.bubble.power(r, 1.0) - t.trace).abs()).collect();
            let weight = 1.0 / parts.iter().sum::<f64>();
            if !weight.is_finite() {
                continue;
            }
            let res = (u - ansatz.value(r)) * weight;
            let jac: Vec<f64> = ansatz
                .terms
                .iter()
                .map(|t| {
                    let z = crate::bubbles::bubble_dderiv(r, &t.bubble)
                        - crate::bubbles::bubble_dderiv(dom.radius(), &t.bubble);
                    t.sign * t.bubble.delta() * z * weight
                })
                .collect();
            for i in 0..m {
                jtr[i] += jac[i] * res;
                for j in 0..m {
                    jtj[(i, j)] += jac[i] * jac[j];
                }
            }
        }
        let step = jtj.lu().solve(&jtr).ok_or_else(|| Error::FitDegenerate("singular normal equations".into()))?;
        // Cap the step so that a poor start cannot jump across scales.
        let cap = step.iter().fold(0.0f64, |a, s| a.max(s.abs()));
        let damp = if cap > 0.5 { 0.5 / cap } else { 1.0 };
        for i in 0..m {
            deltas[i] *= (damp * step[i]).exp();
        }
        if cap < 1e-13 {
            break;
        }
    }
    Ok(deltas)
}

fn fit_single(u: &RadialField) -> Result<f64> {
    let grid = u.grid();
    let dom = BallDomain::new(grid.radius())?;
    let dim = grid.dim();
    let (nodes, values) = fit_nodes(u);
    let k = 0.5 * (dim as f64 - 2.0);
    let d0 = (bubble_amplitude(dim) / u.values()[0].abs()).powf(1.0 / k);
    let d0 = d0.clamp(grid.smallest_positive(), grid.radius());
    Ok(gauss_newton(nodes, values, dom, dim, vec![d0])?[0])
}

/// Scales `(δ1, δ2)` of the tower ansatz closest to a sign-changing solution.
pub fn fit_concentration(sol: &BvpSolution) -> Result<(f64, f64)> {
    let u = &sol.u;
    let grid = u.grid();
    let dim = grid.dim();
    let dom = BallDomain::new(grid.radius())?;
    let nodal = sol.nodal_radius.ok_or_else(|| Error::FitDegenerate("solution does not change sign".into()))?;
    let k = 0.5 * (dim as f64 - 2.0);
    let amp = bubble_amplitude(dim);
    let (nodes, values) = fit_nodes(u);
    // Inner scale from the value at the centre, where the inner bubble dominates.
    let d2 = (amp / values[0].abs()).powf(1.0 / k);
    // Outer scale from the positive lobe alone, scanning before refining.
    let outer: Vec<(f64, f64)> = nodes.iter().zip(values).filter(|(&r, _)| r >= nodal).map(|(&r, &v)| (r, v)).collect();
    if outer.len() < 3 {
        return Err(Error::FitDegenerate("outer lobe is not resolved".into()));
    }
    let cost = |d1: f64| -> f64 {
        match Ansatz::new(dim, dom, &[d1, d2]) {
            Ok(a) => outer
                .iter()
                .map(|&(r, v)| {
                    let s = a.terms[0].bubble.power(r, 1.0) - a.terms[0].trace;
                    let e = (v - a.value(r)) / s.abs().max(f64::MIN_POSITIVE);
                    e * e
                })
                .sum(),
            Err(_) => f64::INFINITY,
        }
    };
    let (lo, hi) = ((2.0 * d2).ln(), (10.0 * grid.radius()).ln());
    let best = (0..=200)
        .map(|i| (lo + (hi - lo) * i as f64 / 200.0).exp())
        .min_by(|a, b| cost(*a).total_cmp(&cost(*b)))
        .expect("non-empty scan");
    let (on, ov): (Vec<f64>, Vec<f64>) = outer.iter().copied().unzip();
    let d1 = gauss_newton(&on, &ov, dom, dim, vec![best, d2]).map(|d| d[0]).unwrap_or(best);
    let fitted = gauss_newton(nodes, values, dom, dim, vec![d1, d2])?;
    let (f1, f2) = (fitted[0], fitted[1]);
    if !(f2 / f1 <= 0.3) {
        return Err(Error::FitDegenerate(format!("scales {f1:e} and {f2:e} are not separated")));
    }
    Ok((f1, f2))
}
