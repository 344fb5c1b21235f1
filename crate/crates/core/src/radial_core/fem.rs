//! Piecewise-linear Galerkin machinery with the radial weight `|S^{N-1}| r^{N-1}`.

use std::sync::Arc;

use super::grid::RadialGrid;
use super::sphere_area;

/// Gauss points per element.
pub const GAUSS_POINTS: usize = 8;

/// Gauss–Legendre nodes and weights on `[0, 1]`.
pub fn gauss_legendre(m: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; m];
    let mut w = vec![0.0; m];
    for i in 0..m.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (m as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=m {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pm = if m == 1 { 1.0 } else { p0 };
            let pn = if m == 1 { z } else { p1 };
            dp = m as f64 * (z * pn - pm) / (z * z - 1.0);
            let dz = pn / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        x[i] = 0.5 * (1.0 - z);
        x[m - 1 - i] = 0.5 * (1.0 + z);
        w[i] = 0.5 * wi;
        w[m - 1 - i] = 0.5 * wi;
    }
    (x, w)
}

/// Symmetric tridiagonal-structured matrix stored by diagonals.
#[derive(Debug, Clone)]
pub struct Tridiag {
    pub lower: Vec<f64>,
    pub diag: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Tridiag {
    pub fn zeros(n: usize) -> Self {
        Self { lower: vec![0.0; n], diag: vec![0.0; n], upper: vec![0.0; n] }
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    pub fn mul(&self, x: &[f64]) -> Vec<f64> {
        let n = self.len();
        (0..n)
            .map(|i| {
                let mut s = self.diag[i] * x[i];
                if i > 0 {
                    s += self.lower[i] * x[i - 1];
                }
                if i + 1 < n {
                    s += self.upper[i] * x[i + 1];
                }
                s
            })
            .collect()
    }

    /// Thomas elimination without pivoting. Pivoting is deliberately avoided:
    /// rows near the origin are scaled like `r^N` and row exchanges there
    /// excite the singular `r^{2-N}` mode.
    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let n = self.len();
        let mut c = vec![0.0; n];
        let mut d = vec![0.0; n];
        let mut beta = self.diag[0];
        debug_assert!(beta != 0.0, "zero pivot");
        c[0] = self.upper[0] / beta;
        d[0] = rhs[0] / beta;
        for i in 1..n {
            beta = self.diag[i] - self.lower[i] * c[i - 1];
            debug_assert!(beta != 0.0, "zero pivot");
            c[i] = if i + 1 < n { self.upper[i] / beta } else { 0.0 };
            d[i] = (rhs[i] - self.lower[i] * d[i - 1]) / beta;
        }
        for i in (0..n - 1).rev() {
            d[i] -= c[i] * d[i + 1];
        }
        d
    }

    /// Replaces the last row by the identity (homogeneous Dirichlet at `R`).
    pub fn pin_last(&mut self) {
        let n = self.len();
        self.lower[n - 1] = 0.0;
        self.diag[n - 1] = 1.0;
        self.upper[n - 2] = 0.0;
    }

    pub fn add_scaled(&mut self, other: &Tridiag, s: f64) {
        for i in 0..self.len() {
            self.lower[i] += s * other.lower[i];
            self.diag[i] += s * other.diag[i];
            self.upper[i] += s * other.upper[i];
        }
    }
}

/// Precomputed element data for a grid.
#[derive(Debug, Clone)]
pub struct Discretization {
    grid: Arc<RadialGrid>,
    /// `|S^{N-1}| (b^N - a^N) / (N h^2)` per element.
    stiff: Vec<f64>,
    /// Quadrature radii, element-major.
    qr: Vec<f64>,
    /// Quadrature weights including `|S^{N-1}| r^{N-1}` and the element width.
    qw: Vec<f64>,
    /// Local coordinate of each quadrature point within its element.
    qt: Vec<f64>,
}

impl Discretization {
    pub fn new(grid: Arc<RadialGrid>) -> Self {
        let n = grid.dim() as i32;
        let surf = sphere_area(grid.dim());
        let (gx, gw) = gauss_legendre(GAUSS_POINTS);
        let nodes = grid.nodes();
        let ne = nodes.len() - 1;
        let mut stiff = Vec::with_capacity(ne);
        let mut qr = Vec::with_capacity(ne * GAUSS_POINTS);
        let mut qw = Vec::with_capacity(ne * GAUSS_POINTS);
        for e in 0..ne {
            let (a, b) = (nodes[e], nodes[e + 1]);
            let h = b - a;
            // b^N - a^N without cancellation for short elements far from 0.
            let diff = if a > 0.0 { a.powi(n) * (n as f64 * (h / a).ln_1p()).exp_m1() } else { b.powi(n) };
            stiff.push(surf * diff / (n as f64 * h * h));
            for k in 0..GAUSS_POINTS {
                let r = a + gx[k] * h;
                qr.push(r);
                qw.push(surf * gw[k] * h * r.powi(n - 1));
            }
        }
        let qt = gx.iter().copied().cycle().take(ne * GAUSS_POINTS).collect();
        Self { grid, stiff, qr, qw, qt }
    }

    pub fn grid(&self) -> &Arc<RadialGrid> {
        &self.grid
    }
    pub fn n_nodes(&self) -> usize {
        self.grid.len()
    }
    pub fn quad_radii(&self) -> &[f64] {
        &self.qr
    }
    pub fn quad_weights(&self) -> &[f64] {
        &self.qw
    }
    pub fn element_stiffness(&self) -> &[f64] {
        &self.stiff
    }

    pub fn stiffness(&self) -> Tridiag {
        let n = self.n_nodes();
        let mut k = Tridiag::zeros(n);
        for (e, &ke) in self.stiff.iter().enumerate() {
            k.diag[e] += ke;
            k.diag[e + 1] += ke;
            k.upper[e] -= ke;
            k.lower[e + 1] -= ke;
        }
        k
    }

    pub fn apply_stiffness(&self, u: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; u.len()];
        for (e, &ke) in self.stiff.iter().enumerate() {
            let t = ke * (u[e] - u[e + 1]);
            out[e] += t;
            out[e + 1] -= t;
        }
        out
    }

    /// `sum_e k_e (u_{e+1}-u_e)(v_{e+1}-v_e)`.
    pub fn stiffness_form(&self, u: &[f64], v: &[f64]) -> f64 {
        self.stiff.iter().enumerate().map(|(e, &ke)| ke * (u[e + 1] - u[e]) * (v[e + 1] - v[e])).sum()
    }

    /// Nodal values interpolated to the quadrature points.
    pub fn at_quad(&self, u: &[f64]) -> Vec<f64> {
        self.qt
            .iter()
            .enumerate()
            .map(|(q, &t)| {
                let e = q / GAUSS_POINTS;
                (1.0 - t) * u[e] + t * u[e + 1]
            })
            .collect()
    }

    /// Closure evaluated at the quadrature points.
    pub fn sample<F: FnMut(f64) -> f64>(&self, f: F) -> Vec<f64> {
        self.qr.iter().copied().map(f).collect()
    }

    /// Consistent load vector `b_i = ∫ g φ_i` from values of `g` at the quadrature points.
    pub fn load(&self, g: &[f64]) -> Vec<f64> {
        let mut b = vec![0.0; self.n_nodes()];
        for (q, (&t, &w)) in self.qt.iter().zip(&self.qw).enumerate() {
            let e = q / GAUSS_POINTS;
            let wg = w * g[q];
            b[e] += (1.0 - t) * wg;
            b[e + 1] += t * wg;
        }
        b
    }

    /// Weighted mass matrix `∫ c φ_i φ_j`.
    pub fn mass(&self, c: &[f64]) -> Tridiag {
        let mut m = Tridiag::zeros(self.n_nodes());
        for (q, (&t, &w)) in self.qt.iter().zip(&self.qw).enumerate() {
            let e = q / GAUSS_POINTS;
            let wc = w * c[q];
            let (l, r) = (1.0 - t, t);
            m.diag[e] += wc * l * l;
            m.diag[e + 1] += wc * r * r;
            m.upper[e] += wc * l * r;
            m.lower[e + 1] += wc * l * r;
        }
        m
    }

    /// `∫ g dx` from values at the quadrature points.
    pub fn integrate(&self, g: &[f64]) -> f64 {
        g.iter().zip(&self.qw).map(|(a, w)| a * w).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let (x, w) = gauss_legendre(GAUSS_POINTS);
        assert_relative_eq!(w.iter().sum::<f64>(), 1.0, epsilon = 1e-15);
        for deg in 0..(2 * GAUSS_POINTS as i32) {
            let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(deg)).sum();
            assert_relative_eq!(s, 1.0 / (deg as f64 + 1.0), max_relative = 1e-13);
        }
    }

    #[test]
    fn thomas_solves_tridiagonal() {
        let mut t = Tridiag::zeros(5);
        for i in 0..5 {
            t.diag[i] = 4.0 + i as f64;
            if i > 0 {
                t.lower[i] = -1.0;
            }
            if i < 4 {
                t.upper[i] = -1.5;
            }
        }
        let x = vec![1.0, -2.0, 0.5, 3.0, 1.0];
        let b = t.mul(&x);
        let y = t.solve(&b);
        for (a, b) in x.iter().zip(&y) {
            assert_relative_eq!(a, b, epsilon = 1e-13);
        }
    }
}
