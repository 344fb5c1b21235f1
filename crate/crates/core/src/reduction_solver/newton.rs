//! Damped Newton iteration on a tridiagonal system bordered by a few dense
//! rows and columns.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::radial_core::fem::Tridiag;

/// Linearization `[A B; C 0]` at the current iterate.
pub(crate) struct BorderedJacobian {
    pub a: Tridiag,
    pub cols: Vec<Vec<f64>>,
    pub rows: Vec<Vec<f64>>,
}

/// Residual of the field equations and of the scalar side conditions.
#[derive(Debug, Clone)]
pub(crate) struct Residual {
    pub field: Vec<f64>,
    pub side: Vec<f64>,
}

/// A nonlinear system in nodal unknowns `w` (last node pinned to zero) and
/// a few scalars `x`.
pub(crate) trait BorderedProblem {
    fn residual(&self, w: &[f64], x: &[f64]) -> Residual;
    fn jacobian(&self, w: &[f64], x: &[f64]) -> BorderedJacobian;
    /// Size of a residual, comparable to the solver tolerance.
    fn merit(&self, r: &Residual) -> f64;
}

/// Solves `[A B; C 0] [dw; dx] = -[f; g]` with the last row of `A` pinned.
pub(crate) fn solve_bordered(jac: &BorderedJacobian, res: &Residual) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut a = jac.a.clone();
    a.pin_last();
    let n = a.len();
    let m = jac.cols.len();
    let mut rhs: Vec<f64> = res.field.iter().map(|v| -v).collect();
    rhs[n - 1] = 0.0;
    let y0 = a.solve(&rhs);
    if m == 0 {
        return Ok((y0, Vec::new()));
    }
    let yb: Vec<Vec<f64>> = jac
        .cols
        .iter()
        .map(|c| {
            let mut c = c.clone();
            c[n - 1] = 0.0;
            a.solve(&c)
        })
        .collect();
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    // (-C Yb) dx = -g - C y0
    let schur = DMatrix::from_fn(m, m, |i, j| -dot(&jac.rows[i], &yb[j]));
    let rhs_x = DVector::from_fn(m, |i, _| -res.side[i] - dot(&jac.rows[i], &y0));
    let dx = schur.lu().solve(&rhs_x).ok_or(Error::ConstraintSingular)?;
    if dx.iter().any(|v| !v.is_finite()) {
        return Err(Error::ConstraintSingular);
    }
    let mut dw = y0;
    for (j, y) in yb.iter().enumerate() {
        for (d, v) in dw.iter_mut().zip(y) {
            *d -= dx[j] * v;
        }
    }
    Ok((dw, dx.iter().copied().collect()))
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct NewtonOptions {
    pub tol: f64,
    pub max_iterations: usize,
    pub max_halvings: usize,
    /// Steps taken even when the start already meets `tol`; one step makes
    /// the scalar unknowns consistent with the field.
    pub min_iterations: usize,
}

impl NewtonOptions {
    pub fn new(tol: f64) -> Self {
        Self { tol, max_iterations: 200, max_halvings: 20, min_iterations: 0 }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct NewtonOutcome {
    pub w: Vec<f64>,
    pub x: Vec<f64>,
    pub iterations: usize,
    pub merit: f64,
    pub converged: bool,
}

/// Backtracking Newton: halve the step until the merit decreases.
pub(crate) fn newton<P: BorderedProblem>(
    problem: &P,
    mut w: Vec<f64>,
    mut x: Vec<f64>,
    opts: NewtonOptions,
) -> Result<NewtonOutcome> {
    let mut res = problem.residual(&w, &x);
    let mut merit = problem.merit(&res);
    let mut iterations = 0;
    while (merit > opts.tol || iterations < opts.min_iterations) && iterations < opts.max_iterations {
        if !merit.is_finite() {
            return Err(Error::NewtonDiverged { iterations, residual: merit });
        }
        let jac = problem.jacobian(&w, &x);
        let (dw, dx) = solve_bordered(&jac, &res)?;
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..=opts.max_halvings {
            let wt: Vec<f64> = w.iter().zip(&dw).map(|(a, b)| a + t * b).collect();
            let xt: Vec<f64> = x.iter().zip(&dx).map(|(a, b)| a + t * b).collect();
            let rt = problem.residual(&wt, &xt);
            let mt = problem.merit(&rt);
            if mt.is_finite() && (mt < merit || (merit <= opts.tol && mt <= opts.tol)) {
                accepted = Some((wt, xt, rt, mt));
                break;
            }
            t *= 0.5;
        }
        iterations += 1;
        match accepted {
            Some((wt, xt, rt, mt)) => {
                w = wt;
                x = xt;
                res = rt;
                merit = mt;
            }
            None => break,
        }
    }
    Ok(NewtonOutcome { w, x, iterations, merit, converged: merit <= opts.tol })
}
