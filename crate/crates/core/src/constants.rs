//! Dimension-dependent constants, each computed from a Beta closed form and
//! cross-checked by quadrature.

use num_rational::Ratio;

use crate::error::{Error, Result};
use crate::radial_core::{integrate_radial_with, sphere_area, QuadOptions};

/// Exact rational exponent.
pub type Exponent = Ratio<i64>;

fn check_dim(dim: u32) -> Result<i64> {
    if dim < 7 {
        return Err(Error::DimensionTooSmall(dim));
    }
    Ok(dim as i64)
}

/// `p = (N+2)/(N-2)`.
pub fn critical_power(dim: u32) -> Exponent {
    let n = dim as i64;
    Ratio::new(n + 2, n - 2)
}

/// Scale exponent of the outer bubble, `1/(N-4)`.
pub fn alpha1(dim: u32) -> Result<Exponent> {
    let n = check_dim(dim)?;
    Ok(Ratio::new(1, n - 4))
}

/// Scale exponent of the inner bubble, `(3N-10)/((N-4)(N-6))`.
pub fn alpha2(dim: u32) -> Result<Exponent> {
    let n = check_dim(dim)?;
    Ok(Ratio::new(3 * n - 10, (n - 4) * (n - 6)))
}

/// Energy exponent of the outer correction, `(N-2)/(N-4)`.
pub fn theta1(dim: u32) -> Result<Exponent> {
    let n = check_dim(dim)?;
    Ok(Ratio::new(n - 2, n - 4))
}

/// Energy exponent of the inner correction, `(N-2)^2/((N-4)(N-6))`.
pub fn theta2(dim: u32) -> Result<Exponent> {
    let n = check_dim(dim)?;
    Ok(Ratio::new((n - 2) * (n - 2), (n - 4) * (n - 6)))
}

pub fn to_f64(r: Exponent) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

/// `[N(N-2)]^{(N-2)/4}`.
pub fn bubble_amplitude(dim: u32) -> f64 {
    let n = dim as f64;
    (0.25 * (n - 2.0) * (n * (n - 2.0)).ln()).exp()
}

pub fn ln_gamma(x: f64) -> f64 {
    statrs::function::gamma::ln_gamma(x)
}

fn ln_beta(a: f64, b: f64) -> f64 {
    ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b)
}

/// `∫_0^∞ r^a (1+r^2)^{-m} dr = ½ B((a+1)/2, m-(a+1)/2)`.
pub fn beta_oracle(a_exp: f64, m: f64) -> Result<f64> {
    let x = 0.5 * (a_exp + 1.0);
    let y = m - x;
    if !(a_exp > -1.0) || !(y > 0.0) {
        return Err(Error::Divergent(format!("r^{a_exp} (1+r^2)^-{m} is not integrable on (0, inf)")));
    }
    Ok(0.5 * ln_beta(x, y).exp())
}

/// Quadrature values of the energy coefficients and their worst relative
/// deviation from the closed forms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureCheck {
    pub a1: f64,
    pub a2: f64,
    pub a3: f64,
    pub max_rel_discrepancy: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DimensionalConstants {
    pub dim: u32,
    pub p: f64,
    pub alpha_n: f64,
    pub omega_n: f64,
    pub surface: f64,
    pub gamma_n: f64,
    pub sobolev_s: f64,
    pub a1: f64,
    pub a2: f64,
    pub a3: f64,
    pub theta1: f64,
    pub theta2: f64,
    pub alpha1: f64,
    pub alpha2: f64,
    pub exponents: Exponents,
    pub quadrature: QuadratureCheck,
}

/// The rational exponents behind the `f64` fields.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Exponents {
    pub p: Exponent,
    pub theta1: Exponent,
    pub theta2: Exponent,
    pub alpha1: Exponent,
    pub alpha2: Exponent,
}

impl DimensionalConstants {
    /// `S^{N/2}`, the energy scale of one bubble times `N`.
    pub fn sobolev_energy(&self) -> f64 {
        (0.5 * self.dim as f64 * self.sobolev_s.ln()).exp()
    }

    /// Flat key/value view for tabular output.
    pub fn to_record(&self) -> Vec<(&'static str, f64)> {
        vec![
            ("dim", self.dim as f64),
            ("p", self.p),
            ("alpha_n", self.alpha_n),
            ("omega_n", self.omega_n),
            ("surface", self.surface),
            ("gamma_n", self.gamma_n),
            ("sobolev_s", self.sobolev_s),
            ("sobolev_energy", self.sobolev_energy()),
            ("a1", self.a1),
            ("a2", self.a2),
            ("a3", self.a3),
            ("a1_quadrature", self.quadrature.a1),
            ("a2_quadrature", self.quadrature.a2),
            ("a3_quadrature", self.quadrature.a3),
            ("max_rel_discrepancy", self.quadrature.max_rel_discrepancy),
            ("theta1", self.theta1),
            ("theta2", self.theta2),
            ("alpha1", self.alpha1),
            ("alpha2", self.alpha2),
        ]
    }
}

fn radial_moment(a_exp: i32, m: f64) -> Result<f64> {
    let opts = QuadOptions { rel_tol: 1e-13, abs_tol: 0.0, max_intervals: 2000 };
    let r = integrate_radial_with(|r| r.powi(a_exp) * (1.0 + r * r).powf(-m), 0.0, f64::INFINITY, &[1.0], opts)?;
    Ok(r.value)
}

pub fn compute_constants(dim: u32) -> Result<DimensionalConstants> {
    let n = check_dim(dim)?;
    let nf = n as f64;
    let exps = Exponents {
        p: critical_power(dim),
        theta1: theta1(dim)?,
        theta2: theta2(dim)?,
        alpha1: alpha1(dim)?,
        alpha2: alpha2(dim)?,
    };
    let p = to_f64(exps.p);
    let surface = sphere_area(dim);
    let omega_n = surface / nf;
    let ln_alpha = 0.25 * (nf - 2.0) * (nf * (nf - 2.0)).ln();
    let ln_surf = surface.ln();
    let half = 0.5f64.ln();
    // ln of α^{p+1} is (N/2) ln(N(N-2)) exactly.
    let ln_alpha_p1 = 0.5 * nf * (nf * (nf - 2.0)).ln();
    let b1 = beta_oracle(nf - 1.0, 0.5 * (nf + 2.0))?;
    let b2 = beta_oracle(nf - 1.0, nf - 2.0)?;
    let b3 = beta_oracle(1.0, 0.5 * (nf + 2.0))?;
    let a1 = (half + ln_alpha_p1 + ln_surf + b1.ln()).exp();
    let a2 = (half + 2.0 * ln_alpha + ln_surf + b2.ln()).exp();
    let a3 = (ln_alpha_p1 + ln_surf + b3.ln()).exp();
    let q1 = 0.5 * ln_alpha_p1.exp() * surface * radial_moment(dim as i32 - 1, 0.5 * (nf + 2.0))?;
    let q2 = 0.5 * (2.0 * ln_alpha).exp() * surface * radial_moment(dim as i32 - 1, nf - 2.0)?;
    let q3 = ln_alpha_p1.exp() * surface * radial_moment(1, 0.5 * (nf + 2.0))?;
    let disc = [(a1, q1), (a2, q2), (a3, q3)].iter().map(|(a, q)| ((a - q) / a).abs()).fold(0.0, f64::max);
    let sobolev_s = std::f64::consts::PI * nf * (nf - 2.0) * ((ln_gamma(0.5 * nf) - ln_gamma(nf)) * 2.0 / nf).exp();
    Ok(DimensionalConstants {
        dim,
        p,
        alpha_n: ln_alpha.exp(),
        omega_n,
        surface,
        gamma_n: 1.0 / (nf * (nf - 2.0) * omega_n),
        sobolev_s,
        a1,
        a2,
        a3,
        theta1: to_f64(exps.theta1),
        theta2: to_f64(exps.theta2),
        alpha1: to_f64(exps.alpha1),
        alpha2: to_f64(exps.alpha2),
        exponents: exps,
        quadrature: QuadratureCheck { a1: q1, a2: q2, a3: q3, max_rel_discrepancy: disc },
    })
}
