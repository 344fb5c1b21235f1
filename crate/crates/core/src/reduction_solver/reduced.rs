//! The reduced energy `J_ε(V + φ1 + φ2)` as a function of `(d1, d2)` and its
//! critical point.

use std::collections::HashMap;
use std::sync::Arc;

use crate::bubbles::{BallDomain, TowerConfig};
use crate::error::{Error, Result};
use crate::radial_core::{inner_h1, norm_h1, RadialGrid};
use crate::reduced_energy::energy_direct;

use super::ansatz::Ansatz;
use super::auxiliary::{solve_stage1, solve_stage2, AuxiliarySolution};

/// Reduced energy and its pieces.
#[derive(Debug, Clone)]
pub struct ReducedEnergy {
    pub value: f64,
    /// `J_ε(V)`.
    pub ansatz_energy: f64,
    /// `J_ε(V + φ1) - J_ε(V)`.
    pub stage1_increment: f64,
    /// `J_ε(V + φ1 + φ2) - J_ε(V)`.
    pub full_increment: f64,
    pub aux: AuxiliarySolution,
}

/// Runs both auxiliary stages and evaluates the energy of the assembled field.
pub fn reduced_j(
    eps: f64,
    d1: f64,
    d2: f64,
    grid: &Arc<RadialGrid>,
    dom: &BallDomain,
    tol: f64,
) -> Result<ReducedEnergy> {
    let s1 = solve_stage1(eps, d1, grid, dom, tol)?;
    let aux = solve_stage2(eps, d1, d2, &s1, grid, dom, tol)?;
    aux.require_converged()?;
    let cfg = TowerConfig::new(grid.dim(), dom.radius(), eps, d1, d2)?;
    let ansatz = Ansatz::from_config(&cfg)?;
    let ansatz_energy = energy_direct(&cfg)?;
    let stage1_increment = ansatz.energy_increment(&aux.phi1, eps);
    let full_increment = ansatz.energy_increment(&aux.remainder(), eps);
    Ok(ReducedEnergy { value: ansatz_energy + full_increment, ansatz_energy, stage1_increment, full_increment, aux })
}

/// Closed rectangle of admissible `(d1, d2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchBox {
    pub d1: (f64, f64),
    pub d2: (f64, f64),
}

impl SearchBox {
    pub fn new(d1: (f64, f64), d2: (f64, f64)) -> Result<Self> {
        for (lo, hi) in [d1, d2] {
            if !(lo > 0.0 && hi > lo && hi.is_finite()) {
                return Err(Error::InvalidParameter(format!("bad interval [{lo}, {hi}]")));
            }
        }
        Ok(Self { d1, d2 })
    }

    fn range(&self, k: usize) -> (f64, f64) {
        if k == 0 {
            self.d1
        } else {
            self.d2
        }
    }
}

/// Where the gradient of one coordinate vanishes.
#[derive(Debug, Clone, Copy, PartialEq)]
enum CoordinateRoot {
    Interior(f64),
    Boundary(f64),
}

impl CoordinateRoot {
    fn value(self) -> f64 {
        match self {
            CoordinateRoot::Interior(x) | CoordinateRoot::Boundary(x) => x,
        }
    }
}

/// Zero of `g` on `[lo, hi]` at which `g` turns from negative to positive,
/// searched first near `guess`. Works in `log x`.
fn coordinate_root<G: FnMut(f64) -> Result<f64>>(
    mut g: G,
    lo: f64,
    hi: f64,
    guess: f64,
    xtol: f64,
) -> Result<CoordinateRoot> {
    let (llo, lhi) = (lo.ln(), hi.ln());
    let mut eval = |t: f64| g(t.exp());
    // Expand around the guess until the sign pattern `- +` is bracketed.
    let t0 = guess.ln().clamp(llo, lhi);
    let g0 = eval(t0)?;
    let mut bracket = None;
    if g0 == 0.0 {
        return Ok(CoordinateRoot::Interior(t0.exp()));
    }
    let mut step = 0.02f64;
    let (mut a, mut ga) = (t0, g0);
    loop {
        let b = if g0 > 0.0 { (a - step).max(llo) } else { (a + step).min(lhi) };
        if b == a {
            break;
        }
        let gb = eval(b)?;
        if (gb > 0.0) != (ga > 0.0) || gb == 0.0 {
            bracket = Some(if g0 > 0.0 { (b, gb, a, ga) } else { (a, ga, b, gb) });
            break;
        }
        a = b;
        ga = gb;
        step *= 2.0;
    }
    let Some((mut a, mut ga, mut b, mut gb)) = bracket else {
        // Gradient of one sign on the whole side: the minimum sits on the boundary.
        return Ok(CoordinateRoot::Boundary(a.exp()));
    };
    if ga > 0.0 && gb <= 0.0 {
        // Sign pattern `+ -`: a maximum, not a minimum.
        return Ok(CoordinateRoot::Boundary(if g0 > 0.0 { lo } else { hi }));
    }
    // Illinois variant of regula falsi.
    let mut side = 0;
    for _ in 0..200 {
        if (b - a).abs() <= xtol {
            break;
        }
        let c = (a * gb - b * ga) / (gb - ga);
        let c = if c.is_finite() && c > a && c < b { c } else { 0.5 * (a + b) };
        let gc = eval(c)?;
        if gc == 0.0 {
            return Ok(CoordinateRoot::Interior(c.exp()));
        }
        if gc < 0.0 {
            a = c;
            ga = gc;
            if side == -1 {
                gb *= 0.5;
            }
            side = -1;
        } else {
            b = c;
            gb = gc;
            if side == 1 {
                ga *= 0.5;
            }
            side = 1;
        }
    }
    let t = (a * gb - b * ga) / (gb - ga);
    let t = if t.is_finite() && t >= a && t <= b { t } else { 0.5 * (a + b) };
    let interior = t > llo + xtol && t < lhi - xtol;
    Ok(if interior { CoordinateRoot::Interior(t.exp()) } else { CoordinateRoot::Boundary(t.exp()) })
}

/// Critical point of a function of `(d1, d2)` known through its gradient.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradientMinimum {
    pub d1: f64,
    pub d2: f64,
    pub interior: bool,
    pub gradient: [f64; 2],
    pub sweeps: usize,
}

/// Alternating one-dimensional root finding on the two gradient components,
/// followed by Newton steps on the full gradient in `log d`.
pub fn minimize_by_gradient<G>(mut grad: G, bx: &SearchBox, start: [f64; 2], xtol: f64) -> Result<GradientMinimum>
where
    G: FnMut(f64, f64) -> Result<[f64; 2]>,
{
    let mut d = [start[0].clamp(bx.d1.0, bx.d1.1), start[1].clamp(bx.d2.0, bx.d2.1)];
    let mut interior = [false; 2];
    let mut sweeps = 0;
    for _ in 0..60 {
        sweeps += 1;
        let old = d;
        for k in 0..2 {
            let (lo, hi) = bx.range(k);
            let fixed = d;
            let root = coordinate_root(
                |x| {
                    let mut p = fixed;
                    p[k] = x;
                    Ok(grad(p[0], p[1])?[k])
                },
                lo,
                hi,
                d[k],
                0.1 * xtol,
            )?;
            interior[k] = matches!(root, CoordinateRoot::Interior(_));
            d[k] = root.value();
        }
        let moved = (0..2).map(|k| (d[k] / old[k]).ln().abs()).fold(0.0, f64::max);
        if moved <= xtol {
            break;
        }
    }
    let mut g = grad(d[0], d[1])?;
    if interior[0] && interior[1] {
        // Newton refinement in log coordinates, kept only while it helps.
        for _ in 0..4 {
            let h: f64 = 1e-5;
            let mut jac = [[0.0; 2]; 2];
            for k in 0..2 {
                let mut p = d;
                p[k] *= h.exp();
                let gp = grad(p[0], p[1])?;
                for i in 0..2 {
                    jac[i][k] = (gp[i] - g[i]) / h;
                }
            }
            let det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
            if !(det.abs() > 0.0) {
                break;
            }
            let s0 = -(jac[1][1] * g[0] - jac[0][1] * g[1]) / det;
            let s1 = -(-jac[1][0] * g[0] + jac[0][0] * g[1]) / det;
            if s0.abs().max(s1.abs()) < 0.1 * xtol {
                break;
            }
            let trial = [d[0] * s0.exp(), d[1] * s1.exp()];
            let gt = grad(trial[0], trial[1])?;
            let better = (0..2).all(|i| gt[i].abs() <= g[i].abs()) || (0..2).any(|i| gt[i] == 0.0);
            if !better {
                break;
            }
            d = trial;
            g = gt;
        }
    }
    Ok(GradientMinimum { d1: d[0], d2: d[1], interior: interior[0] && interior[1], gradient: g, sweeps })
}

/// Critical point of the reduced energy with the multipliers found there.
#[derive(Debug, Clone)]
pub struct ReducedMinimum {
    pub eps: f64,
    pub d1_min: f64,
    pub d2_min: f64,
    pub interior: bool,
    pub multipliers_at_min: Vec<f64>,
    /// `∂J̃/∂d_j` reconstructed from the multipliers.
    pub gradient: [f64; 2],
    pub solves: usize,
}

/// Gradient of `J̃` from the multipliers of the second stage.
fn reduced_gradient(aux: &AuxiliarySolution, cfg: &TowerConfig, grid: &Arc<RadialGrid>) -> Result<[f64; 2]> {
    let ansatz = Ansatz::from_config(cfg)?;
    let z = ansatz.kernels(grid);
    let (n1, n2) = (norm_h1(&z[0]), norm_h1(&z[1]));
    let c12 = inner_h1(&z[0], &z[1])? / (n1 * n2);
    let (nu1, nu2) = (aux.multipliers[0], aux.multipliers[1]);
    Ok([cfg.eps.powf(cfg.alpha1()) * n1 * (nu1 + nu2 * c12), -cfg.eps.powf(cfg.alpha2()) * n2 * (nu2 + nu1 * c12)])
}

/// Locates the critical point of `J̃_ε` in `bx`, starting from `start`.
///
/// The gradient is read off the Lagrange multipliers: `J'(u)[v] = Σ ν_k ⟨ẑ_k, v⟩`
/// for the assembled field, so `∂J̃/∂d_j` needs no differencing of energies.
pub fn minimize_reduced(
    eps: f64,
    bx: &SearchBox,
    start: [f64; 2],
    grid: &Arc<RadialGrid>,
    dom: &BallDomain,
    tol: f64,
) -> Result<ReducedMinimum> {
    let mut stage1: HashMap<u64, AuxiliarySolution> = HashMap::new();
    let mut solves = 0usize;
    let mut last: Option<AuxiliarySolution> = None;
    let mut grad = |d1: f64, d2: f64| -> Result<[f64; 2]> {
        let cfg = TowerConfig::new(grid.dim(), dom.radius(), eps, d1, d2)?;
        cfg.validate()?;
        let s1 = match stage1.get(&d1.to_bits()) {
            Some(s) => s.clone(),
            None => {
                let s = solve_stage1(eps, d1, grid, dom, tol)?;
                s.require_converged()?;
                stage1.insert(d1.to_bits(), s.clone());
                s
            }
        };
        let aux = solve_stage2(eps, d1, d2, &s1, grid, dom, tol)?;
        aux.require_converged()?;
        solves += 1;
        let g = reduced_gradient(&aux, &cfg, grid)?;
        last = Some(aux);
        Ok(g)
    };
    let found = minimize_by_gradient(&mut grad, bx, start, 1e-9)?;
    // Re-evaluate at the reported point so the multipliers belong to it.
    let gradient = grad(found.d1, found.d2)?;
    let aux = last.take().expect("gradient evaluated");
    Ok(ReducedMinimum {
        eps,
        d1_min: found.d1,
        d2_min: found.d2,
        interior: found.interior,
        multipliers_at_min: aux.multipliers,
        gradient,
        solves,
    })
}
