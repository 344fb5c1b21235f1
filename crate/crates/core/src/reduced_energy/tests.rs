use std::sync::Arc;

use approx::assert_relative_eq;

use super::*;
use crate::bubbles::{projected_bubble, BallDomain, Bubble, TowerConfig};
use crate::constants::compute_constants;
use crate::radial_core::{build_grid, RadialField};

fn log_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let (mx, my) = (lx.iter().sum::<f64>() / n, ly.iter().sum::<f64>() / n);
    let num: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let den: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    num / den
}

#[test]
fn functional_of_zero_and_mass_shift() {
    let grid = Arc::new(build_grid(7, 1.0, 1e-3, 40, 100).unwrap());
    assert_eq!(functional_j(&RadialField::zeros(&grid), 0.3), 0.0);
    let b = Bubble::new(7, 0.05).unwrap();
    let dom = BallDomain::unit();
    let u = RadialField::interpolate(&grid, &|r: f64| projected_bubble(r, &b, &dom), true);
    let l2 = crate::radial_core::norm_lq(&u, 2.0, 0.0, 1.0, 7).unwrap();
    let diff = functional_j(&u, 0.3) - functional_j(&u, 0.0);
    assert_relative_eq!(diff, -0.15 * l2 * l2, max_relative = 1e-6);
}

#[test]
fn functional_of_single_bubble_near_sobolev_level() {
    let grid = Arc::new(build_grid(7, 1.0, 1e-5, 120, 200).unwrap());
    let b = Bubble::new(7, 1e-3).unwrap();
    let dom = BallDomain::unit();
    let u = RadialField::interpolate(&grid, &|r: f64| projected_bubble(r, &b, &dom), true);
    let c = compute_constants(7).unwrap();
    assert_relative_eq!(functional_j(&u, 0.0), c.sobolev_energy() / 7.0, max_relative = 1e-2);
}

#[test]
fn single_bubble_coefficients() {
    let c = compute_constants(7).unwrap();
    for radius in [1.0, 2.0] {
        let dom = BallDomain::new(radius).unwrap();
        for delta in [1e-2, 3e-3, 1e-3] {
            let t = single_bubble_terms(delta * radius, 0.1, &c, &dom).unwrap();
            assert!((t.energy_excess / t.predicted_excess - 1.0).abs() < 0.05, "{delta} {t:?}");
            assert!((t.mass_term / t.predicted_mass - 1.0).abs() < 0.02, "{delta} {t:?}");
        }
    }
    let t1 = single_bubble_terms(1e-2, 0.1, &c, &BallDomain::unit()).unwrap();
    let t2 = single_bubble_terms(1e-2, 0.1, &c, &BallDomain::new(2.0).unwrap()).unwrap();
    assert_relative_eq!(t2.predicted_excess / t1.predicted_excess, 2f64.powi(-5), max_relative = 1e-14);
}

#[test]
fn interaction_tends_to_a3_on_both_balls() {
    let c = compute_constants(7).unwrap();
    for radius in [1.0, 2.0] {
        let dom = BallDomain::new(radius).unwrap();
        for ratio in [1e-3, 1e-4] {
            let (d1, d2) = (0.05, 0.05 * ratio);
            let t = interaction_integral(d1, d2, 0.1, &c, &dom).unwrap();
            let scaled = t.interaction / ratio.powf(2.5);
            assert!((scaled / c.a3 - 1.0).abs() < 0.05, "R={radius} ratio={ratio} {scaled} vs {}", c.a3);
        }
    }
    let zero = interaction_integral(0.1, 0.0, 0.1, &c, &BallDomain::unit()).unwrap();
    assert_eq!(zero.interaction, 0.0);
}

#[test]
fn cross_mass_stays_bounded() {
    let c = compute_constants(7).unwrap();
    let dom = BallDomain::unit();
    let eps = 0.05;
    let scaled: Vec<f64> = [1e-2, 1e-3, 1e-4, 1e-5]
        .into_iter()
        .map(|ratio: f64| {
            let t = interaction_integral(0.1, 0.1 * ratio, eps, &c, &dom).unwrap();
            t.cross_mass / (eps * ratio.powf(2.5) * 0.01)
        })
        .collect();
    let (lo, hi) = scaled.iter().fold((f64::INFINITY, 0.0f64), |(l, h), &x| (l.min(x), h.max(x)));
    assert!(lo > 0.0 && hi < 2.0 * lo, "{scaled:?}");
}

#[test]
fn direct_energy_limits_and_symmetry() {
    let cfg = TowerConfig::new(7, 1.0, 1e-2, 1.0, 1.0).unwrap();
    let e = energy_direct(&cfg).unwrap();
    let c = compute_constants(7).unwrap();
    assert!((e / (2.0 * c.sobolev_energy() / 7.0) - 1.0).abs() < 1e-2);
    // Same scales through another factorization.
    let alt = TowerConfig::from_deltas(7, 1.0, 1e-2, cfg.delta1(), cfg.delta2()).unwrap();
    assert_relative_eq!(energy_direct(&alt).unwrap(), e, max_relative = 1e-12);
    let single = TowerConfig::single(7, 1.0, 1e-2, 1.0).unwrap();
    let b = single.outer();
    let dom = BallDomain::unit();
    let grid = Arc::new(build_grid(7, 1.0, 1e-4, 200, 4000).unwrap());
    let u = RadialField::interpolate(&grid, &|r: f64| projected_bubble(r, &b, &dom), true);
    assert_relative_eq!(energy_direct(&single).unwrap(), functional_j(&u, 1e-2), max_relative = 1e-5);
}

#[test]
fn direct_energy_matches_first_order_expansion() {
    let c = compute_constants(7).unwrap();
    let dom = BallDomain::unit();
    let eps: f64 = 1e-2;
    let cfg = TowerConfig::new(7, 1.0, eps, 1.0, 1.0).unwrap();
    let rep = expansion_terms(&cfg, &c, &dom).unwrap();
    assert_relative_eq!(rep.residual_after_leading, rep.direct - rep.leading, max_relative = 1e-6);
    let bound = 2.0 * eps.powf(c.theta1 + 1.0 / 3.0);
    assert!(rep.residual_after_g1.abs() <= bound * (g1(1.0, &c, &dom).abs()), "{rep:?}");
}

#[test]
fn expansion_residual_decays() {
    let c = compute_constants(7).unwrap();
    let dom = BallDomain::unit();
    let d1 = critical_d1(&c, &dom).unwrap();
    let g = g1(d1, &c, &dom);
    let mut prev = f64::INFINITY;
    for eps in [1e-1, 3e-2, 1e-2, 3e-3, 1e-3] {
        let cfg = TowerConfig::new(7, 1.0, eps, d1, 1.0).unwrap();
        let rep = expansion_terms(&cfg, &c, &dom).unwrap();
        let scaled = (rep.residual_after_g1 / eps.powf(c.theta1)).abs();
        assert!(scaled < prev, "{eps} {scaled} {prev}");
        prev = scaled;
    }
    assert!(prev < 0.1 * g.abs(), "{prev} {g}");
}

#[test]
fn critical_parameters() {
    let c = compute_constants(7).unwrap();
    let dom = BallDomain::unit();
    let d1 = critical_d1(&c, &dom).unwrap();
    assert!((d1 - 0.16995).abs() < 1e-4, "{d1}");
    let n = 7.0;
    assert_relative_eq!((n - 2.0) * c.a1 * d1.powf(n - 3.0), 2.0 * c.a2 * d1, max_relative = 1e-8);
    let h = 1e-4 * d1;
    let g1pp = (g1(d1 + h, &c, &dom) - 2.0 * g1(d1, &c, &dom) + g1(d1 - h, &c, &dom)) / (h * h);
    assert!(g1pp > 0.0);
    let rep = critical_d2_report(&c, &dom, d1, RobinFactor::Unit).unwrap();
    assert_relative_eq!(rep.numeric, rep.closed_form, max_relative = 1e-8);
    let d2 = rep.numeric;
    let h = 1e-4 * d2;
    let g2pp = (g2(d1, d2 + h, &c, &dom) - 2.0 * g2(d1, d2, &c, &dom) + g2(d1, d2 - h, &c, &dom)) / (h * h);
    assert!(g2pp > 0.0);
    let c8 = compute_constants(8).unwrap();
    let d1_8 = critical_d1(&c8, &dom).unwrap();
    assert!((d1_8 - 0.19305).abs() < 1e-4, "{d1_8}");
}

#[test]
fn robin_switch_matters_only_off_the_unit_ball() {
    let c = compute_constants(7).unwrap();
    let unit = BallDomain::unit();
    let big = BallDomain::new(2.0).unwrap();
    assert_eq!(g2(0.3, 0.2, &c, &unit), g2_with(0.3, 0.2, &c, &unit, RobinFactor::Robin));
    assert!(g2(0.3, 0.2, &c, &big) != g2_with(0.3, 0.2, &c, &big, RobinFactor::Robin));
}

#[test]
fn differenced_energy_tracks_g2() {
    let c = compute_constants(7).unwrap();
    let dom = BallDomain::unit();
    for eps in [0.1, 0.2] {
        let cfg = TowerConfig::new(7, 1.0, eps, 1.0, 1.0).unwrap();
        let diff = energy_diff_d2(&cfg, 2.0).unwrap();
        let model = eps.powf(c.theta2) * (g2(1.0, 1.0, &c, &dom) - g2(1.0, 2.0, &c, &dom));
        let ratio = diff / model;
        assert!((0.5..=1.5).contains(&ratio), "eps={eps} ratio={ratio}");
        let back = TowerConfig::new(7, 1.0, eps, 1.0, 2.0).unwrap();
        assert_relative_eq!(energy_diff_d2(&back, 1.0).unwrap(), -diff, max_relative = 1e-12);
        assert_eq!(energy_diff_d2(&cfg, 1.0).unwrap(), 0.0);
    }
}

#[test]
fn differenced_energy_agrees_with_difference_of_totals() {
    // At eps = 0.3 the signal is large enough for the naive difference.
    let cfg = TowerConfig::new(7, 1.0, 0.3, 1.0, 1.0).unwrap();
    let alt = TowerConfig::new(7, 1.0, 0.3, 1.0, 2.0).unwrap();
    let naive = energy_direct(&cfg).unwrap() - energy_direct(&alt).unwrap();
    assert_relative_eq!(energy_diff_d2(&cfg, 2.0).unwrap(), naive, max_relative = 1e-9);
}

#[test]
fn differenced_energy_insensitive_to_d1() {
    let c = compute_constants(7).unwrap();
    let dom = BallDomain::unit();
    let d1 = critical_d1(&c, &dom).unwrap();
    let eps: f64 = 0.1;
    let ratios: Vec<f64> = [0.8 * d1, d1, 1.2 * d1]
        .into_iter()
        .map(|d| {
            let cfg = TowerConfig::new(7, 1.0, eps, d, 1.0).unwrap();
            let model = eps.powf(c.theta2) * (g2(d, 1.0, &c, &dom) - g2(d, 2.0, &c, &dom));
            energy_diff_d2(&cfg, 2.0).unwrap() / model
        })
        .collect();
    for r in &ratios {
        assert!((r / ratios[1] - 1.0).abs() < 0.1, "{ratios:?}");
    }
}

#[test]
fn r1_norm_slope_and_projection() {
    let c = compute_constants(7).unwrap();
    let dom = BallDomain::unit();
    let grid = Arc::new(build_grid(7, 1.0, 1e-4, 60, 200).unwrap());
    let eps: Vec<f64> = (0..5).map(|k| 1e-3 * 10f64.powf(0.5 * k as f64)).collect();
    let reps: Vec<ErrorNormReport> = eps.iter().map(|&e| error_norm_r1(e, 1.0, &c, &dom, &grid).unwrap()).collect();
    for r in &reps {
        assert!(r.norm_projected <= r.norm_unprojected + 1e-12);
    }
    for w in reps.windows(2) {
        assert!(w[0].norm_projected < w[1].norm_projected);
    }
    let ys: Vec<f64> = reps.iter().map(|r| r.norm_projected).collect();
    let slope = log_slope(&eps, &ys);
    assert!(slope >= c.theta1 / 2.0, "{slope}");
}

#[test]
fn r2_norms() {
    let c = compute_constants(8).unwrap();
    let dom = BallDomain::unit();
    let grid = Arc::new(build_grid(8, 1.0, 1e-5, 60, 200).unwrap());
    let eps = [0.05, 0.1, 0.2, 0.3];
    let mut sur = Vec::new();
    for &e in &eps {
        let r = error_norm_r2(e, 1.0, 1.0, &c, &dom, &grid).unwrap();
        let s = error_norm_r2_surrogate(e, 1.0, 1.0, &c, &dom).unwrap();
        assert!(r.norm_projected <= r.norm_unprojected + 1e-12);
        assert!(r.norm_unprojected <= s * 1.01, "{e} {r:?} {s}");
        sur.push(s);
    }
    let slope = log_slope(&eps, &sur);
    assert!(slope >= c.theta2 / 2.0, "{slope}");
    let coarse = Arc::new(build_grid(8, 1.0, 1e-2, 20, 50).unwrap());
    assert!(matches!(error_norm_r2(0.05, 1.0, 1.0, &c, &dom, &coarse), Err(crate::Error::MeshUnresolved { .. })));
}
