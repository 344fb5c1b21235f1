//! Leading-order energy expansion of the tower and its reduced coefficients.

use crate::bubbles::{BallDomain, TowerConfig};
use crate::constants::DimensionalConstants;
use crate::error::{Error, Result};

use super::energy::{bubble_energy_scale, energy_excess};

/// Direct energy of the ansatz against successive terms of its expansion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpansionReport {
    pub eps: f64,
    pub leading: f64,
    pub g1_term: f64,
    pub g2_term: f64,
    pub direct: f64,
    pub residual_after_leading: f64,
    pub residual_after_g1: f64,
    pub residual_after_g2: f64,
}

impl ExpansionReport {
    pub fn to_record(&self) -> Vec<(&'static str, f64)> {
        vec![
            ("eps", self.eps),
            ("leading", self.leading),
            ("g1_term", self.g1_term),
            ("g2_term", self.g2_term),
            ("direct", self.direct),
            ("residual_after_leading", self.residual_after_leading),
            ("residual_after_g1", self.residual_after_g1),
            ("residual_after_g2", self.residual_after_g2),
        ]
    }
}

/// Which factor multiplies `a3` in `G2`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum RobinFactor {
    /// No factor: the interaction of two concentric bubbles is local.
    #[default]
    Unit,
    /// `τ(0)` of the domain.
    Robin,
}

impl RobinFactor {
    pub fn value(self, dim: u32, dom: &BallDomain) -> f64 {
        match self {
            RobinFactor::Unit => 1.0,
            RobinFactor::Robin => dom.robin_at_center(dim),
        }
    }
}

/// `a1 τ(0) d1^{N-2} - a2 d1^2`.
pub fn g1(d1: f64, consts: &DimensionalConstants, dom: &BallDomain) -> f64 {
    let n = consts.dim as i32;
    consts.a1 * dom.robin_at_center(consts.dim) * d1.powi(n - 2) - consts.a2 * d1 * d1
}

/// `a3 (d2/d1)^{(N-2)/2} - a2 d2^2`.
pub fn g2(d1: f64, d2: f64, consts: &DimensionalConstants, dom: &BallDomain) -> f64 {
    g2_with(d1, d2, consts, dom, RobinFactor::Unit)
}

pub fn g2_with(d1: f64, d2: f64, consts: &DimensionalConstants, dom: &BallDomain, robin: RobinFactor) -> f64 {
    let k = 0.5 * (consts.dim as f64 - 2.0);
    consts.a3 * robin.value(consts.dim, dom) * (d2 / d1).powf(k) - consts.a2 * d2 * d2
}

/// Splits the direct energy of `cfg` into the modelled expansion terms.
pub fn expansion_terms(cfg: &TowerConfig, consts: &DimensionalConstants, dom: &BallDomain) -> Result<ExpansionReport> {
    expansion_terms_with(cfg, consts, dom, RobinFactor::Unit)
}

pub fn expansion_terms_with(
    cfg: &TowerConfig,
    consts: &DimensionalConstants,
    dom: &BallDomain,
    robin: RobinFactor,
) -> Result<ExpansionReport> {
    if (dom.radius() - cfg.radius).abs() > 1e-15 * cfg.radius {
        return Err(Error::ConfigurationInvalid(format!(
            "domain radius {} differs from configuration radius {}",
            dom.radius(),
            cfg.radius
        )));
    }
    let eps = cfg.eps;
    let k = if cfg.has_inner() { 2.0 } else { 1.0 };
    let leading = k * bubble_energy_scale(cfg.dim) / cfg.dim as f64;
    let excess = energy_excess(cfg)?;
    let g1_term = eps.powf(consts.theta1) * g1(cfg.d1, consts, dom);
    let g2_term =
        if cfg.has_inner() { eps.powf(consts.theta2) * g2_with(cfg.d1, cfg.d2, consts, dom, robin) } else { 0.0 };
    Ok(ExpansionReport {
        eps,
        leading,
        g1_term,
        g2_term,
        direct: leading + excess,
        residual_after_leading: excess,
        residual_after_g1: excess - g1_term,
        residual_after_g2: excess - g1_term - g2_term,
    })
}

/// Minimizes a one-dimensional function on `(0, inf)` given its derivative,
/// which must go from negative to positive exactly once across the scan.
fn minimize_positive<F, D>(f: F, df: D, lo_exp: f64, hi_exp: f64) -> Result<f64>
where
    F: Fn(f64) -> f64,
    D: Fn(f64) -> f64,
{
    let steps = 400;
    let x_at = |i: usize| 10f64.powf(lo_exp + (hi_exp - lo_exp) * i as f64 / steps as f64);
    let mut bracket = None;
    for i in 0..steps {
        if df(x_at(i)) < 0.0 && df(x_at(i + 1)) > 0.0 {
            bracket = Some((x_at(i).ln(), x_at(i + 1).ln()));
            break;
        }
    }
    let (mut a, mut b) = bracket.ok_or_else(|| Error::MinimizerNotFound("derivative has no sign change".into()))?;
    // Golden section on log x.
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    for _ in 0..60 {
        if f(c.exp()) < f(d.exp()) {
            b = d;
        } else {
            a = c;
        }
        c = b - g * (b - a);
        d = a + g * (b - a);
    }
    // Golden section stalls at sqrt(eps); finish on the derivative sign.
    let (mut a, mut b) = (a - 1e-3, b + 1e-3);
    if !(df(a.exp()) < 0.0 && df(b.exp()) > 0.0) {
        return Err(Error::MinimizerNotFound("lost the derivative bracket".into()));
    }
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        if df(m.exp()) < 0.0 {
            a = m;
        } else {
            b = m;
        }
    }
    Ok((0.5 * (a + b)).exp())
}

/// `(2a2 / ((N-2) a1 τ(0)))^{1/(N-4)}`, checked against a numerical minimizer.
pub fn critical_d1(consts: &DimensionalConstants, dom: &BallDomain) -> Result<f64> {
    let n = consts.dim as f64;
    let tau = dom.robin_at_center(consts.dim);
    let closed = (2.0 * consts.a2 / ((n - 2.0) * consts.a1 * tau)).powf(1.0 / (n - 4.0));
    let df = |d: f64| (n - 2.0) * consts.a1 * tau * d.powf(n - 3.0) - 2.0 * consts.a2 * d;
    let numeric = minimize_positive(|d| g1(d, consts, dom), df, -8.0, 8.0)?;
    if ((numeric - closed) / closed).abs() > 1e-8 {
        return Err(Error::MinimizerNotFound(format!("closed form {closed} disagrees with minimizer {numeric}")));
    }
    Ok(closed)
}

/// Minimizer of `d2 -> G2(d1, d2)` together with the closed form from its
/// first-order condition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CriticalD2 {
    pub numeric: f64,
    pub closed_form: f64,
}

pub fn critical_d2(consts: &DimensionalConstants, dom: &BallDomain, d1: f64) -> Result<f64> {
    Ok(critical_d2_report(consts, dom, d1, RobinFactor::Unit)?.numeric)
}

pub fn critical_d2_report(
    consts: &DimensionalConstants,
    dom: &BallDomain,
    d1: f64,
    robin: RobinFactor,
) -> Result<CriticalD2> {
    let n = consts.dim as f64;
    let k = 0.5 * (n - 2.0);
    let a3 = consts.a3 * robin.value(consts.dim, dom);
    let closed_form = (4.0 * consts.a2 * d1.powf(k) / ((n - 2.0) * a3)).powf(2.0 / (n - 6.0));
    // G2'(d)/d has the sign of G2'(d) and stays representable at tiny d.
    let df = |d: f64| a3 * k * d.powf(k - 2.0) / d1.powf(k) - 2.0 * consts.a2;
    let numeric = minimize_positive(|d| g2_with(d1, d, consts, dom, robin), df, -40.0, 10.0)?;
    Ok(CriticalD2 { numeric, closed_form })
}
