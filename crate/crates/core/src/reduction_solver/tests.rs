use std::sync::Arc;

use super::auxiliary::{stage1_with, StageModel};
use super::bvp::nodal_crossing;
use super::*;
use crate::bubbles::{BallDomain, TowerConfig};
use crate::constants::compute_constants;
use crate::error::Error;
use crate::radial_core::{build_grid, inner_h1, RadialField, RadialGrid};
use crate::reduced_energy::{critical_d1, critical_d2, energy_direct, functional_j};

const TOL: f64 = 1e-12;

fn tower_grid(eps: f64, npd: usize) -> Arc<RadialGrid> {
    Arc::new(build_grid(8, 1.0, 1e-8 * eps.powf(1.75) / 20.0, npd, 200).unwrap())
}

fn fine_grid(eps: f64) -> Arc<RadialGrid> {
    Arc::new(build_grid(8, 1.0, 1e-8 * eps.powf(1.75) / 20.0, 480, 400).unwrap())
}

fn dbar(dim: u32) -> (f64, f64) {
    let consts = compute_constants(dim).unwrap();
    let dom = BallDomain::unit();
    let d1 = critical_d1(&consts, &dom).unwrap();
    (d1, critical_d2(&consts, &dom, d1).unwrap())
}

fn slope(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / n, ly.iter().sum::<f64>() / n);
    let num: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let den: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    num / den
}

#[test]
fn homogeneous_stage_returns_zero() {
    let grid = Arc::new(build_grid(7, 1.0, 1e-6, 60, 200).unwrap());
    let s = stage1_with(1e-2, 1.0, &grid, &BallDomain::unit(), TOL, StageModel::Homogeneous, None).unwrap();
    assert!(s.converged);
    assert!(s.norm_phi1 <= TOL, "{}", s.norm_phi1);
    assert!(s.multipliers[0].abs() <= TOL);
}

#[test]
fn stage1_norm_and_sup_norm_decay() {
    let grid = Arc::new(build_grid(7, 1.0, 1e-6, 60, 200).unwrap());
    let dom = BallDomain::unit();
    let eps = [1e-1, 3e-2, 1e-2, 3e-3, 1e-3];
    let mut norms = Vec::new();
    let mut sups = Vec::new();
    for &e in &eps {
        let s = solve_stage1(e, 1.0, &grid, &dom, TOL).unwrap();
        assert!(s.converged);
        norms.push(s.norm_phi1);
        sups.push(s.phi1.sup_norm() * e.powf(5.0 / 6.0));
    }
    assert!(slope(&eps, &norms) >= 5.0 / 6.0, "{norms:?}");
    assert!(sups.windows(2).all(|w| w[1] < w[0]), "{sups:?}");
}

#[test]
fn stage1_rejects_bad_input() {
    let grid = Arc::new(build_grid(7, 1.0, 1e-6, 60, 200).unwrap());
    let dom = BallDomain::unit();
    assert!(matches!(solve_stage1(1e-2, 1.0, &grid, &dom, 0.0), Err(Error::InvalidParameter(_))));
    let coarse = Arc::new(build_grid(7, 1.0, 1e-2, 20, 50).unwrap());
    assert!(matches!(solve_stage1(1e-9, 1.0, &coarse, &dom, TOL), Err(Error::MeshUnresolved { .. })));
    assert!(matches!(solve_stage1(1e-2, 1.0, &grid, &BallDomain::new(2.0).unwrap(), TOL), Err(Error::GridMismatch)));
}

#[test]
fn stage2_degenerate_scales_are_rejected() {
    let eps: f64 = 0.1;
    let grid = tower_grid(eps, 60);
    let dom = BallDomain::unit();
    let s1 = solve_stage1(eps, 1.0, &grid, &dom, TOL).unwrap();
    // δ2 = δ1
    let d2 = eps.powf(0.25 - 1.75);
    assert!(matches!(solve_stage2(eps, 1.0, d2, &s1, &grid, &dom, TOL), Err(Error::ConfigurationInvalid(_))));
}

#[test]
fn stage2_is_smaller_and_orthogonal() {
    let eps = 0.1;
    let grid = tower_grid(eps, 60);
    let dom = BallDomain::unit();
    let s1 = solve_stage1(eps, 1.0, &grid, &dom, TOL).unwrap();
    let z1 = &super::ansatz::Ansatz::new(8, dom, &[eps.powf(0.25)]).unwrap().unit_kernels(&grid)[0];
    assert!(inner_h1(&s1.phi1, z1).unwrap().abs() <= 1e-10 * s1.norm_phi1);
    let s2 = solve_stage2(eps, 1.0, 1.0, &s1, &grid, &dom, TOL).unwrap();
    assert!(s2.converged);
    assert!(s2.norm_phi2.unwrap() < s2.norm_phi1);
    let cfg = TowerConfig::new(8, 1.0, eps, 1.0, 1.0).unwrap();
    let kernels = super::ansatz::Ansatz::from_config(&cfg).unwrap().unit_kernels(&grid);
    let phi2 = s2.phi2.as_ref().unwrap();
    for z in &kernels {
        assert!(inner_h1(phi2, z).unwrap().abs() <= 1e-10 * s2.norm_phi2.unwrap());
    }
}

#[test]
fn stage_ratio_decreases_along_the_sweep() {
    let dom = BallDomain::unit();
    let mut ratios = Vec::new();
    for eps in [0.3, 0.2, 0.1, 0.05] {
        let grid = tower_grid(eps, 60);
        let s1 = solve_stage1(eps, 1.0, &grid, &dom, TOL).unwrap();
        let s2 = solve_stage2(eps, 1.0, 1.0, &s1, &grid, &dom, TOL).unwrap();
        assert!(s2.converged);
        ratios.push(s2.stage_ratio().unwrap());
    }
    assert!(ratios.windows(2).all(|w| w[1] < w[0]), "{ratios:?}");
    assert!(ratios.iter().all(|&r| r < 1.0));
}

#[test]
fn stage_solves_are_mesh_independent() {
    let eps = 0.1;
    let (d1, d2) = dbar(8);
    let dom = BallDomain::unit();
    let coarse = reduced_j(eps, d1, d2, &tower_grid(eps, 60), &dom, TOL).unwrap();
    let fine = reduced_j(eps, d1, d2, &tower_grid(eps, 120), &dom, TOL).unwrap();
    let dn = (fine.aux.norm_phi1 - coarse.aux.norm_phi1).abs() / fine.aux.norm_phi1;
    assert!(dn <= 1e-2, "{dn}");
    let de = (fine.value - coarse.value).abs() / fine.value.abs();
    assert!(de <= 1e-3, "{de}");
}

#[test]
fn reduced_energy_with_zero_remainder_is_the_ansatz_energy() {
    let eps = 0.1;
    let cfg = TowerConfig::new(8, 1.0, eps, 1.0, 1.0).unwrap();
    let grid = Arc::new(build_grid(8, 1.0, 1e-6, 480, 2000).unwrap());
    let v = super::ansatz::Ansatz::from_config(&cfg).unwrap().interpolate(&grid);
    let direct = energy_direct(&cfg).unwrap();
    let rel = (functional_j(&v, eps) - direct).abs() / direct;
    assert!(rel <= 1e-4, "{rel}");
}

#[test]
fn remainder_energies_are_higher_order() {
    let dom = BallDomain::unit();
    let (d1, d2) = dbar(8);
    let mut first = Vec::new();
    let mut second = Vec::new();
    for eps in [0.3f64, 0.2, 0.1, 0.05] {
        let grid = tower_grid(eps, 60);
        let r = reduced_j(eps, d1, d2, &grid, &dom, TOL).unwrap();
        first.push(r.full_increment.abs() / eps.powf(1.5 + 0.1));
        let s = reduced_j(eps, 1.0, 1.0, &grid, &dom, TOL).unwrap();
        second.push((s.full_increment - s.stage1_increment).abs() / eps.powf(4.5));
    }
    for q in [&first, &second] {
        assert!(q.iter().all(|&v| v <= 1.5 * q[0]), "{q:?}");
        assert!(q[q.len() - 1] <= q[0], "{q:?}");
    }
}

#[test]
fn gradient_minimizer_recovers_a_quadratic() {
    let bx = SearchBox::new((0.01, 5.0), (1e-6, 1e-2)).unwrap();
    let (a, b) = (0.7, 3e-4);
    let grad = |x: f64, y: f64| Ok([2.0 * (x - a) + 0.3 * (y / b - 1.0), 2.0 * (y / b - 1.0) / b + 0.3 * (x - a) / b]);
    let m = minimize_by_gradient(grad, &bx, [0.2, 1e-5], 1e-12).unwrap();
    assert!(m.interior);
    assert!((m.d1 - a).abs() <= 1e-8 * a, "{}", m.d1);
    assert!((m.d2 - b).abs() <= 1e-8 * b, "{}", m.d2);
    let edge = minimize_by_gradient(|x: f64, _y: f64| Ok([x - 10.0, 0.0]), &bx, [1.0, 1e-4], 1e-12).unwrap();
    assert!(!edge.interior);
}

#[test]
fn reduced_minimizer_is_interior_and_drifts_toward_critical_d1() {
    let dom = BallDomain::unit();
    let (d1bar, d2bar) = dbar(8);
    let bx = SearchBox::new((0.02, 2.0), (1e-8, 1e-2)).unwrap();
    let mut dist = Vec::new();
    for eps in [0.2, 0.1, 0.05] {
        let m = minimize_reduced(eps, &bx, [d1bar, d2bar], &tower_grid(eps, 60), &dom, TOL).unwrap();
        assert!(m.interior);
        assert!(m.multipliers_at_min.iter().all(|v| v.abs() <= 1e-6), "{:?}", m.multipliers_at_min);
        dist.push((m.d1_min - d1bar).abs());
    }
    assert!(dist.windows(2).all(|w| w[1] < w[0]), "{dist:?}");
}

#[test]
fn zero_start_stays_trivial() {
    let grid = fine_grid(0.1);
    let sol = solve_bvp(0.1, BvpInit::Field(RadialField::zeros(&grid)), &grid, 1e-10).unwrap();
    assert!(sol.converged);
    assert_eq!(sol.u.sup_norm(), 0.0);
    assert_eq!(sol.residual_h1, 0.0);
    assert!(sol.nodal_radius.is_none());
}

#[test]
fn nodal_solve_keeps_its_weak_form() {
    let eps = 0.1;
    let grid = fine_grid(eps);
    let rough = solve_bvp(eps, BvpInit::Ansatz { deltas: vec![0.3], remainder: None }, &grid, 1e-3).unwrap();
    let sol = solve_bvp(eps, BvpInit::Field(rough.u), &grid, 1e-10).unwrap();
    assert!(sol.converged);
    assert!(sol.residual_h1 <= 1e-10);
    assert!(sol.nodal_radius.is_none());
    assert!(sol.nehari_residual <= 1e-8, "{}", sol.nehari_residual);
    assert!(nehari_residual(&sol.u.scaled(2.0), eps) > 0.1);
}

#[test]
fn positive_branch_from_a_single_bubble() {
    let eps = 0.1;
    let grid = fine_grid(eps);
    let sol = solve_bvp(eps, BvpInit::Ansatz { deltas: vec![0.3], remainder: None }, &grid, 1e-10).unwrap();
    assert!(sol.converged);
    assert!(sol.u.values().iter().all(|&v| v >= 0.0));
    assert!(sol.nodal_radius.is_none());
    assert!(sol.nehari_residual <= 1e-8, "{}", sol.nehari_residual);
    let s = compute_constants(8).unwrap().sobolev_s;
    let level = s.powi(4) / 8.0;
    assert!(sol.energy < level && sol.energy > 0.99 * level, "{}", sol.energy);
    let report = nodal_analysis(&sol, eps).unwrap();
    assert_eq!(report.nodal_domain_count, 1);
    assert_eq!((report.sign_at_sphere1, report.sign_at_sphere2), (1, 1));
    assert!(!report.inner_negative);
    let d = sol.fitted_delta1.unwrap();
    assert!((d / sol.deltas[0] - 1.0).abs() < 0.05);
}

#[test]
fn nodal_analysis_rejects_spheres_outside_the_ball() {
    let eps = 0.1;
    let grid = Arc::new(build_grid(8, 0.5, 1e-4, 60, 100).unwrap());
    let sol = solve_bvp(eps, BvpInit::Field(RadialField::zeros(&grid)), &grid, 1e-10).unwrap();
    assert!(matches!(nodal_analysis(&sol, eps), Err(Error::RadiusOutsideDomain { .. })));
}

#[test]
fn fit_recovers_exact_ansatz_scales() {
    let grid = Arc::new(build_grid(8, 1.0, 1e-7, 120, 200).unwrap());
    let deltas = [0.1, 1e-4];
    let u = super::ansatz::Ansatz::new(8, BallDomain::unit(), &deltas).unwrap().interpolate(&grid);
    let sol = BvpSolution {
        eps: 0.1,
        nodal_radius: nodal_crossing(&u),
        energy: 0.0,
        nehari_residual: 0.0,
        fitted_delta1: None,
        fitted_delta2: None,
        newton_iterations: 0,
        converged: true,
        residual_h1: 0.0,
        deltas: deltas.to_vec(),
        remainder: None,
        u,
    };
    let (f1, f2) = fit_concentration(&sol).unwrap();
    assert!((f1 / deltas[0] - 1.0).abs() <= 1e-6, "{f1}");
    assert!((f2 / deltas[1] - 1.0).abs() <= 1e-6, "{f2}");
    let mut close = sol.clone();
    close.u = super::ansatz::Ansatz::new(8, BallDomain::unit(), &[0.1, 0.05]).unwrap().interpolate(&grid);
    close.nodal_radius = nodal_crossing(&close.u);
    assert!(matches!(fit_concentration(&close), Err(Error::FitDegenerate(_))));
}

#[test]
fn tower_solution_matches_the_assembled_field() {
    let eps = 0.1;
    let dom = BallDomain::unit();
    let (d1bar, d2bar) = dbar(8);
    let grid = tower_grid(eps, 60);
    let bx = SearchBox::new((0.02, 2.0), (1e-8, 1e-2)).unwrap();
    let m = minimize_reduced(eps, &bx, [d1bar, d2bar], &grid, &dom, TOL).unwrap();
    let r = reduced_j(eps, m.d1_min, m.d2_min, &grid, &dom, TOL).unwrap();
    let cfg = TowerConfig::new(8, 1.0, eps, m.d1_min, m.d2_min).unwrap();
    let assembled =
        super::ansatz::Ansatz::from_config(&cfg).unwrap().interpolate(&grid).axpy(1.0, &r.aux.remainder()).unwrap();
    let sol =
        solve_bvp(eps, BvpInit::Ansatz { deltas: vec![cfg.delta1(), cfg.delta2()], remainder: None }, &grid, 1e-10)
            .unwrap();
    assert!(sol.converged);
    let diff = sol.u.axpy(-1.0, &assembled).unwrap().sup_norm();
    assert!(diff <= 1e-4 * sol.u.sup_norm(), "{}", diff / sol.u.sup_norm());
    assert!(sol.nodal_radius.is_some());
    let report = nodal_analysis(&sol, eps).unwrap();
    assert_eq!(report.nodal_domain_count, 2);
    assert!(report.inner_negative);
    assert_eq!(report.sign_at_sphere1, 1);
    assert!((sol.fitted_delta1.unwrap() / cfg.delta1() - 1.0).abs() < 0.2);
    assert!((sol.fitted_delta2.unwrap() / cfg.delta2() - 1.0).abs() < 0.2);
}

#[test]
fn tower_energy_bound_against_the_positive_solution() {
    let eps = 0.1;
    let (d1bar, d2bar) = dbar(8);
    let grid = fine_grid(eps);
    let cfg = TowerConfig::new(8, 1.0, eps, d1bar, d2bar).unwrap();
    let tower =
        solve_bvp(eps, BvpInit::Ansatz { deltas: vec![cfg.delta1(), cfg.delta2()], remainder: None }, &grid, 1e-10)
            .unwrap();
    let positive =
        solve_bvp(eps, BvpInit::Ansatz { deltas: vec![cfg.delta1()], remainder: None }, &grid, 1e-10).unwrap();
    assert!(tower.converged && positive.converged);
    assert!(tower.nehari_residual <= 1e-8, "{}", tower.nehari_residual);
    assert!(nehari_energy_bound(&tower, &positive));
    assert!(!nehari_energy_bound(&tower, &BvpSolution { energy: tower.energy / 3.0, ..positive.clone() }));
}
