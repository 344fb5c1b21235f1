//! Energy of the closed-form ansatz, written relative to the bubble
//! energies so that small corrections survive double precision.

use crate::bubbles::{Bubble, TowerConfig};
use crate::constants::{critical_power, to_f64, DimensionalConstants};
use crate::error::Result;
use crate::radial_core::fem::Discretization;
use crate::radial_core::{integrate_strict, sphere_area, QuadOptions, RadialField};
use crate::reduction_solver::nonlinearity::{pow1p_m1, primitive};

/// `J_ε(u) = ½‖u‖² - ∫F(u) - (ε/2)∫u²` for a piecewise-linear field.
pub fn functional_j(u: &RadialField, eps: f64) -> f64 {
    let disc = Discretization::new(u.grid().clone());
    let p = to_f64(critical_power(u.grid().dim()));
    let uq = disc.at_quad(u.values());
    let grad = disc.stiffness_form(u.values(), u.values());
    let pot: Vec<f64> = uq.iter().map(|&v| primitive(v, p) + 0.5 * eps * v * v).collect();
    0.5 * grad - disc.integrate(&pot)
}

/// `(1/N)` times the bubble energy is removed from `½U^{p}V - F(V)` where
/// `V = base (1 - t)`; returns the bracket multiplying `|base|^{p+1}`.
fn excess_factor(t: f64, p: f64) -> f64 {
    -0.5 * t - pow1p_m1(-t, p + 1.0) / (p + 1.0)
}

/// Closed-form ansatz `P U_{δ1} - P U_{δ2}` with explicit scales, so that
/// `ε = 0` and single bubbles need no special configuration.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Profile {
    pub outer: Bubble,
    pub inner: Option<Bubble>,
    pub radius: f64,
    pub eps: f64,
}

impl Profile {
    pub fn from_config(cfg: &TowerConfig) -> Self {
        Self { outer: cfg.outer(), inner: cfg.inner(), radius: cfg.radius, eps: cfg.eps }
    }

    pub fn breakpoints(&self) -> Vec<f64> {
        let d1 = self.outer.delta();
        let mut b = vec![d1, d1.sqrt()];
        if let Some(inner) = self.inner {
            b.push(inner.delta());
            b.push((d1 * inner.delta()).sqrt());
        }
        b.retain(|&x| x > 0.0 && x < self.radius);
        b
    }

    fn dim(&self) -> u32 {
        self.outer.dim()
    }
}

/// Pointwise energy density of `P U_{δ1} - P U_{δ2}` minus `(U1^{p+1} + U2^{p+1})/N`.
pub(crate) fn excess_density(r: f64, prof: &Profile, p: f64) -> f64 {
    let n = prof.dim() as f64;
    let outer = prof.outer;
    let u1p1 = outer.power(r, p + 1.0);
    let u1 = outer.power(r, 1.0);
    let c1 = outer.power(prof.radius, 1.0);
    let eps = prof.eps;
    let Some(inner) = prof.inner else {
        let t = c1 / u1;
        let v = u1 - c1;
        return if t < 0.5 {
            u1p1 * excess_factor(t, p) - 0.5 * eps * v * v
        } else {
            0.5 * outer.power(r, p) * v - primitive(v, p) - 0.5 * eps * v * v - u1p1 / n
        };
    };
    let u2p1 = inner.power(r, p + 1.0);
    let u2 = inner.power(r, 1.0);
    let c2 = inner.power(prof.radius, 1.0);
    let v = (u1 - c1) - (u2 - c2);
    if u2 >= u1 {
        let t = (u1 - c1 + c2) / u2;
        if t.abs() < 0.5 {
            return 0.5 * outer.power(r, p) * v - u1p1 / n - 0.5 * eps * v * v + u2p1 * excess_factor(t, p);
        }
    } else {
        let t = (c1 + u2 - c2) / u1;
        if t.abs() < 0.5 {
            return -0.5 * inner.power(r, p) * v - u2p1 / n - 0.5 * eps * v * v + u1p1 * excess_factor(t, p);
        }
    }
    0.5 * (outer.power(r, p) - inner.power(r, p)) * v - primitive(v, p) - 0.5 * eps * v * v - (u1p1 + u2p1) / n
}

fn tail_density(r: f64, bubbles: &[Bubble], p: f64, n: f64) -> f64 {
    bubbles.iter().map(|b| b.power(r, p + 1.0)).sum::<f64>() / n
}

fn quad_opts(scale: f64) -> QuadOptions {
    QuadOptions { rel_tol: 1e-10, abs_tol: 1e-15 * scale, max_intervals: 20_000 }
}

/// `J_ε(V) - k S^{N/2}/N` with `k` the number of bubbles in `cfg`.
pub fn energy_excess(cfg: &TowerConfig) -> Result<f64> {
    cfg.validate()?;
    profile_excess(&Profile::from_config(cfg))
}

pub(crate) fn profile_excess(prof: &Profile) -> Result<f64> {
    let dim = prof.dim();
    let p = to_f64(critical_power(dim));
    let n = dim as f64;
    let surf = sphere_area(dim);
    let n1 = dim as i32 - 1;
    let scale = bubble_energy_scale(dim);
    let bps = prof.breakpoints();
    let inside =
        integrate_strict(|r| excess_density(r, prof, p) * r.powi(n1), 0.0, prof.radius, &bps, quad_opts(scale / surf))?;
    let bubbles: Vec<Bubble> = std::iter::once(prof.outer).chain(prof.inner).collect();
    let tail = integrate_strict(
        |r| tail_density(r, &bubbles, p, n) * r.powi(n1),
        prof.radius,
        f64::INFINITY,
        &[],
        quad_opts(scale / surf),
    )?;
    Ok(surf * (inside - tail))
}

/// `∫_{R^N} U^{p+1}` for any bubble, from the Beta closed form.
pub(crate) fn bubble_energy_scale(dim: u32) -> f64 {
    let n = dim as f64;
    let ln_gamma = crate::constants::ln_gamma;
    let s = std::f64::consts::PI * n * (n - 2.0) * ((ln_gamma(0.5 * n) - ln_gamma(n)) * 2.0 / n).exp();
    (0.5 * n * s.ln()).exp()
}

/// `J_ε` of `P U_{outer} - P U_{inner}` with explicit scales.
pub(crate) fn profile_energy(outer: Bubble, inner: Option<Bubble>, radius: f64, eps: f64) -> Result<f64> {
    let k = if inner.is_some() { 2.0 } else { 1.0 };
    let prof = Profile { outer, inner, radius, eps };
    Ok(k * bubble_energy_scale(outer.dim()) / outer.dim() as f64 + profile_excess(&prof)?)
}

/// `J_ε(P U_{δ1} - P U_{δ2})` by quadrature of closed-form integrands.
pub fn energy_direct(cfg: &TowerConfig) -> Result<f64> {
    let k = if cfg.has_inner() { 2.0 } else { 1.0 };
    Ok(k * bubble_energy_scale(cfg.dim) / cfg.dim as f64 + energy_excess(cfg)?)
}

/// `J_ε(V(d2)) - J_ε(V(d2_alt))` from one quadrature of the density difference.
pub fn energy_diff_d2(cfg: &TowerConfig, d2_alt: f64) -> Result<f64> {
    let alt = TowerConfig { d2: d2_alt, ..*cfg };
    let alt = TowerConfig::with_eta(alt.dim, alt.radius, alt.eps, alt.d1, alt.d2, alt.eta)?;
    cfg.validate()?;
    alt.validate()?;
    if d2_alt == cfg.d2 {
        return Ok(0.0);
    }
    let p = to_f64(critical_power(cfg.dim));
    let n = cfg.dim as f64;
    let surf = sphere_area(cfg.dim);
    let n1 = cfg.dim as i32 - 1;
    let (prof, prof_alt) = (Profile::from_config(cfg), Profile::from_config(&alt));
    let mut bps = prof.breakpoints();
    bps.extend(prof_alt.breakpoints());
    let scale = bubble_energy_scale(cfg.dim) / surf;
    let opts = QuadOptions { rel_tol: 1e-9, abs_tol: 1e-17 * scale, max_intervals: 20_000 };
    let inside = integrate_strict(
        |r| (excess_density(r, &prof, p) - excess_density(r, &prof_alt, p)) * r.powi(n1),
        0.0,
        cfg.radius,
        &bps,
        opts,
    )?;
    let (b, b_alt) = (cfg.inner(), alt.inner());
    let tail = integrate_strict(
        |r| {
            let a = b.map_or(0.0, |b| b.power(r, p + 1.0));
            let c = b_alt.map_or(0.0, |b| b.power(r, p + 1.0));
            (a - c) / n * r.powi(n1)
        },
        cfg.radius,
        f64::INFINITY,
        &[],
        opts,
    )?;
    Ok(surf * (inside - tail))
}

/// Single projected bubble: energy above `S^{N/2}/N` at `ε = 0`, the mass
/// term, and their leading-order predictions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SingleBubbleTerms {
    pub energy_excess: f64,
    pub mass_term: f64,
    pub predicted_excess: f64,
    pub predicted_mass: f64,
}

pub fn single_bubble_terms(
    delta: f64,
    eps: f64,
    consts: &DimensionalConstants,
    dom: &crate::bubbles::BallDomain,
) -> Result<SingleBubbleTerms> {
    let dim = consts.dim;
    let b = Bubble::new(dim, delta)?;
    let excess = profile_excess(&Profile { outer: b, inner: None, radius: dom.radius(), eps: 0.0 })?;
    let surf = sphere_area(dim);
    let c = b.power(dom.radius(), 1.0);
    let n1 = dim as i32 - 1;
    let mass = integrate_strict(
        |r| {
            let v = b.power(r, 1.0) - c;
            v * v * r.powi(n1)
        },
        0.0,
        dom.radius(),
        &[delta],
        QuadOptions::rel(1e-12),
    )?;
    Ok(SingleBubbleTerms {
        energy_excess: excess,
        mass_term: 0.5 * eps * surf * mass,
        predicted_excess: consts.a1 * dom.robin_at_center(dim) * delta.powi(dim as i32 - 2),
        predicted_mass: consts.a2 * eps * delta * delta,
    })
}

/// `∫_Ω U_{δ1}^p U_{δ2}` and the companion `ε ∫_Ω P U_{δ1} P U_{δ2}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InteractionTerms {
    pub interaction: f64,
    pub cross_mass: f64,
}

pub fn interaction_integral(
    delta1: f64,
    delta2: f64,
    eps: f64,
    consts: &DimensionalConstants,
    dom: &crate::bubbles::BallDomain,
) -> Result<InteractionTerms> {
    if delta2 == 0.0 {
        return Ok(InteractionTerms { interaction: 0.0, cross_mass: 0.0 });
    }
    let dim = consts.dim;
    let b1 = Bubble::new(dim, delta1)?;
    let b2 = Bubble::new(dim, delta2)?;
    let p = consts.p;
    let surf = sphere_area(dim);
    let n1 = dim as i32 - 1;
    let rad = dom.radius();
    let bps: Vec<f64> = [delta2, (delta1 * delta2).sqrt(), delta1].into_iter().filter(|&x| x < rad).collect();
    let opts = QuadOptions::rel(1e-11);
    let interaction = integrate_strict(|r| b1.power(r, p) * b2.power(r, 1.0) * r.powi(n1), 0.0, rad, &bps, opts)?;
    let (c1, c2) = (b1.power(rad, 1.0), b2.power(rad, 1.0));
    let cross =
        integrate_strict(|r| (b1.power(r, 1.0) - c1) * (b2.power(r, 1.0) - c2) * r.powi(n1), 0.0, rad, &bps, opts)?;
    Ok(InteractionTerms { interaction: surf * interaction, cross_mass: eps * surf * cross })
}
