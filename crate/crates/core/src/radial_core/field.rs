use std::sync::Arc;

use super::grid::RadialGrid;
use crate::error::{Error, Result};

/// A radial profile `r -> u(r)`.
pub trait RadialFunction {
    fn value(&self, r: f64) -> f64;
    /// Radii where the profile changes character; used to split quadrature.
    fn breakpoints(&self) -> Vec<f64> {
        Vec::new()
    }
}

impl<F: Fn(f64) -> f64> RadialFunction for F {
    fn value(&self, r: f64) -> f64 {
        self(r)
    }
}

/// Continuous piecewise-linear function on a [`RadialGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct RadialField {
    grid: Arc<RadialGrid>,
    values: Vec<f64>,
    dirichlet: bool,
}

impl RadialField {
    pub fn zeros(grid: &Arc<RadialGrid>) -> Self {
        Self { grid: grid.clone(), values: vec![0.0; grid.len()], dirichlet: true }
    }

    /// Nodal interpolant of `f`; with `dirichlet` the last value is forced to 0.
    pub fn interpolate<F: RadialFunction + ?Sized>(grid: &Arc<RadialGrid>, f: &F, dirichlet: bool) -> Self {
        let mut values: Vec<f64> = grid.nodes().iter().map(|&r| f.value(r)).collect();
        if dirichlet {
            *values.last_mut().unwrap() = 0.0;
        }
        Self { grid: grid.clone(), values, dirichlet }
    }

    pub fn from_values(grid: &Arc<RadialGrid>, values: Vec<f64>, dirichlet: bool) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidParameter(format!("expected {} values, got {}", grid.len(), values.len())));
        }
        if dirichlet && *values.last().unwrap() != 0.0 {
            return Err(Error::InvalidParameter("dirichlet field must vanish at R".into()));
        }
        Ok(Self { grid: grid.clone(), values, dirichlet })
    }

    pub fn grid(&self) -> &Arc<RadialGrid> {
        &self.grid
    }
    pub fn values(&self) -> &[f64] {
        &self.values
    }
    pub fn is_dirichlet(&self) -> bool {
        self.dirichlet
    }
    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn same_grid(&self, other: &RadialField) -> bool {
        Arc::ptr_eq(&self.grid, &other.grid) || self.grid == other.grid
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `self + s * other`.
    pub fn axpy(&self, s: f64, other: &RadialField) -> Result<RadialField> {
        if !self.same_grid(other) {
            return Err(Error::GridMismatch);
        }
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a + s * b).collect();
        Ok(Self { grid: self.grid.clone(), values, dirichlet: self.dirichlet && other.dirichlet })
    }

    pub fn scaled(&self, s: f64) -> RadialField {
        Self { grid: self.grid.clone(), values: self.values.iter().map(|v| v * s).collect(), dirichlet: self.dirichlet }
    }
}

impl RadialFunction for RadialField {
    fn value(&self, r: f64) -> f64 {
        let nodes = self.grid.nodes();
        if r >= self.grid.radius() {
            return *self.values.last().unwrap();
        }
        let e = self.grid.locate(r.max(0.0));
        let (a, b) = (nodes[e], nodes[e + 1]);
        let t = (r - a) / (b - a);
        (1.0 - t) * self.values[e] + t * self.values[e + 1]
    }

    fn breakpoints(&self) -> Vec<f64> {
        self.grid.nodes().to_vec()
    }
}
