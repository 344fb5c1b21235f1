//! Bubbles centred at the origin of a ball, their derivative kernels,
//! harmonic corrections and the two-bubble tower.

use crate::constants::{alpha1, alpha2, bubble_amplitude, to_f64};
use crate::error::{Error, Result};

/// The standard bubble `U_δ` in `R^dim`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bubble {
    dim: u32,
    delta: f64,
    amplitude: f64,
}

impl Bubble {
    pub fn new(dim: u32, delta: f64) -> Result<Self> {
        if dim < 7 {
            return Err(Error::DimensionTooSmall(dim));
        }
        if !(delta > 0.0) || !delta.is_finite() {
            return Err(Error::InvalidParameter(format!("delta must be positive, got {delta}")));
        }
        Ok(Self { dim, delta, amplitude: bubble_amplitude(dim) })
    }
    pub fn dim(&self) -> u32 {
        self.dim
    }
    pub fn delta(&self) -> f64 {
        self.delta
    }
    pub fn amplitude(&self) -> f64 {
        self.amplitude
    }

    /// `U_δ(r)^e` without forming `U_δ(r)` first.
    pub fn power(&self, r: f64, e: f64) -> f64 {
        let k = 0.5 * (self.dim as f64 - 2.0);
        let d = self.delta;
        (e * (self.amplitude.ln() + k * (d / (d * d + r * r)).ln())).exp()
    }
}

/// Ball of radius `R` centred at the origin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BallDomain {
    radius: f64,
}

impl BallDomain {
    pub fn new(radius: f64) -> Result<Self> {
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(Error::InvalidParameter(format!("radius must be positive, got {radius}")));
        }
        Ok(Self { radius })
    }
    pub fn unit() -> Self {
        Self { radius: 1.0 }
    }
    pub fn radius(&self) -> f64 {
        self.radius
    }
    /// Robin function at the centre, `R^{2-N}`.
    pub fn robin_at_center(&self, dim: u32) -> f64 {
        self.radius.powi(2 - dim as i32)
    }
    /// Regular part of the Green function with pole at the centre; constant on the ball.
    pub fn green_regular_at_center(&self, dim: u32, _x: f64) -> f64 {
        self.robin_at_center(dim)
    }
}

pub fn bubble_value(r: f64, b: &Bubble) -> f64 {
    let k = 0.5 * (b.dim as f64 - 2.0);
    let d = b.delta;
    b.amplitude * (d / (d * d + r * r)).powf(k)
}

/// `∂U_δ/∂δ`.
pub fn bubble_dderiv(r: f64, b: &Bubble) -> f64 {
    let n = b.dim as f64;
    let d = b.delta;
    let s = d * d + r * r;
    b.amplitude * 0.5 * (n - 2.0) * d.powf(0.5 * (n - 4.0)) * (r * r - d * d) / s.powf(0.5 * n)
}

/// The constant harmonic function with the boundary trace of `U_δ`.
pub fn harmonic_correction(b: &Bubble, dom: &BallDomain) -> f64 {
    bubble_value(dom.radius, b)
}

pub fn projected_bubble(r: f64, b: &Bubble, dom: &BallDomain) -> f64 {
    bubble_value(r, b) - harmonic_correction(b, dom)
}

pub fn projected_z(r: f64, b: &Bubble, dom: &BallDomain) -> f64 {
    bubble_dderiv(r, b) - bubble_dderiv(dom.radius, b)
}

/// Default lower bound on `d_j`.
pub const DEFAULT_ETA: f64 = 1e-12;

/// Parameters of the ansatz `P U_{δ1} - P U_{δ2}` with `δ_j = d_j ε^{α_j}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TowerConfig {
    pub dim: u32,
    pub radius: f64,
    pub eps: f64,
    pub d1: f64,
    /// Zero means no inner bubble.
    pub d2: f64,
    pub eta: f64,
}

impl TowerConfig {
    pub fn new(dim: u32, radius: f64, eps: f64, d1: f64, d2: f64) -> Result<Self> {
        Self::with_eta(dim, radius, eps, d1, d2, DEFAULT_ETA)
    }

    pub fn with_eta(dim: u32, radius: f64, eps: f64, d1: f64, d2: f64, eta: f64) -> Result<Self> {
        if dim < 7 {
            return Err(Error::DimensionTooSmall(dim));
        }
        BallDomain::new(radius)?;
        if !(eps > 0.0) {
            return Err(Error::InvalidParameter(format!("eps must be positive, got {eps}")));
        }
        if !(eta > 0.0 && eta < 1.0) {
            return Err(Error::InvalidParameter(format!("eta must lie in (0, 1), got {eta}")));
        }
        let inside = |d: f64| d > eta && d < 1.0 / eta;
        if !inside(d1) || !(d2 == 0.0 || inside(d2)) {
            return Err(Error::ConfigurationInvalid(format!("d1 = {d1}, d2 = {d2} outside ({eta}, {})", 1.0 / eta)));
        }
        Ok(Self { dim, radius, eps, d1, d2, eta })
    }

    /// Single projected bubble `P U_{δ1}`.
    pub fn single(dim: u32, radius: f64, eps: f64, d1: f64) -> Result<Self> {
        Self::new(dim, radius, eps, d1, 0.0)
    }

    /// Builds the configuration that realises the given scales.
    pub fn from_deltas(dim: u32, radius: f64, eps: f64, delta1: f64, delta2: f64) -> Result<Self> {
        if !(eps > 0.0) {
            return Err(Error::InvalidParameter(format!("eps must be positive, got {eps}")));
        }
        let a1 = to_f64(alpha1(dim)?);
        let a2 = to_f64(alpha2(dim)?);
        let d2 = if delta2 == 0.0 { 0.0 } else { delta2 / eps.powf(a2) };
        Self::new(dim, radius, eps, delta1 / eps.powf(a1), d2)
    }

    pub fn alpha1(&self) -> f64 {
        to_f64(alpha1(self.dim).expect("validated dimension"))
    }
    pub fn alpha2(&self) -> f64 {
        to_f64(alpha2(self.dim).expect("validated dimension"))
    }
    pub fn delta1(&self) -> f64 {
        self.d1 * self.eps.powf(self.alpha1())
    }
    pub fn delta2(&self) -> f64 {
        self.d2 * self.eps.powf(self.alpha2())
    }
    pub fn domain(&self) -> BallDomain {
        BallDomain { radius: self.radius }
    }
    pub fn has_inner(&self) -> bool {
        self.d2 > 0.0
    }
    pub fn outer(&self) -> Bubble {
        Bubble::new(self.dim, self.delta1()).expect("validated scale")
    }
    pub fn inner(&self) -> Option<Bubble> {
        self.has_inner().then(|| Bubble::new(self.dim, self.delta2()).expect("validated scale"))
    }

    /// ε below which `δ2 < δ1`.
    pub fn separation_threshold(&self) -> f64 {
        let n = self.dim as f64;
        (self.d1 / self.d2).powf((n - 4.0) * (n - 6.0) / (2.0 * (n - 2.0)))
    }

    /// Checks that the inner bubble is the narrower one.
    pub fn validate(&self) -> Result<()> {
        if self.has_inner() && self.delta2() >= self.delta1() {
            return Err(Error::ConfigurationInvalid(format!(
                "delta2 = {:e} is not below delta1 = {:e}",
                self.delta2(),
                self.delta1()
            )));
        }
        Ok(())
    }

    /// Radii where tower integrands change character, restricted to `(0, R)`.
    pub fn breakpoints(&self) -> Vec<f64> {
        let d1 = self.delta1();
        let mut b = vec![d1, d1.sqrt()];
        if self.has_inner() {
            let d2 = self.delta2();
            b.push(d2);
            b.push((d1 * d2).sqrt());
        }
        b.retain(|&x| x > 0.0 && x < self.radius);
        b.sort_by(f64::total_cmp);
        b
    }
}

/// `P U_{δ1}(r) - P U_{δ2}(r)`.
pub fn tower_value(r: f64, cfg: &TowerConfig) -> Result<f64> {
    cfg.validate()?;
    let dom = cfg.domain();
    let mut v = projected_bubble(r, &cfg.outer(), &dom);
    if let Some(inner) = cfg.inner() {
        v -= projected_bubble(r, &inner, &dom);
    }
    Ok(v)
}
