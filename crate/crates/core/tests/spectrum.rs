mod common;

use common::*;
use fbstab::expr::Expr;
use fbstab::model::reference_model;
use fbstab::spectrum::{
    alpha_0, alpha_k, c0_bound, gamma_k, gamma_star, mode_constants, nu1, solve_ubar, spectral_report,
};
use fbstab::stationary::{solve_unit, StationaryState, DEFAULT_STEPS};
use fbstab::TumorModel;

fn reference_unit(steps: usize) -> (StationaryState, TumorModel) {
    let (u, m, _) = solve_unit(&reference_model(0.0, 1.0), TOL, steps).unwrap();
    (u, m)
}

#[test]
fn ubar_closed_form_and_series() {
    let (s, m) = reference_unit(DEFAULT_STEPS);
    let u0 = solve_ubar(&m, &s, 0).unwrap();
    assert_eq!(u0.values()[0], 1.0);
    assert!((u0.last_value() - 1f64.sinh()).abs() < 1e-11);
    for k in 1..=6 {
        let u = solve_ubar(&m, &s, k).unwrap();
        assert_eq!(u.values()[0], 1.0);
        let a = mode_constants(3, k).unwrap().a_k;
        let err = u
            .nodes()
            .iter()
            .zip(u.values())
            .map(|(&r, &v)| (v - ubar_series(a, r)).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-11, "k = {k}: {err}");
        assert!(u.values().windows(2).all(|w| w[1] >= w[0]));
    }
}

#[test]
fn ubar_at_one_decreases_with_k() {
    let (s, m) = reference_unit(1024);
    let vals: Vec<f64> = (0..=20).map(|k| solve_ubar(&m, &s, k).unwrap().last_value()).collect();
    assert!(vals.windows(2).all(|w| w[1] < w[0]), "{vals:?}");
}

#[test]
fn gamma_2_matches_series_oracle() {
    let (s, m) = reference_unit(DEFAULT_STEPS);
    let g = gamma_k(&m, &s, 2).unwrap();
    let oracle = gamma_k_ref(2);
    assert!(((g - oracle) / oracle).abs() < 1e-6, "{g} vs {oracle}");
}

#[test]
fn gamma_k_positive_and_independent_of_gamma() {
    let (s, m) = reference_unit(1024);
    for k in 2..=50 {
        assert!(gamma_k(&m, &s, k).unwrap() > 0.0, "k = {k}");
    }
    let a = gamma_k(&m, &s, 3).unwrap();
    let b = gamma_k(&m.with_gamma(17.0), &s, 3).unwrap();
    assert_eq!(a.to_bits(), b.to_bits());
    assert!(gamma_k(&m, &s, 1).is_err());
}

#[test]
fn gamma_k_converges_fourth_order() {
    let oracle = gamma_k_ref(3);
    let errs: Vec<f64> = [32usize, 64, 128]
        .iter()
        .map(|&n| {
            let (s, m) = reference_unit(n);
            (gamma_k(&m, &s, 3).unwrap() - oracle).abs()
        })
        .collect();
    for w in errs.windows(2) {
        let slope = (w[0] / w[1]).log2();
        assert!((3.5..=4.5).contains(&slope), "{errs:?}");
    }
}

#[test]
fn alpha_formula_and_asymptotics() {
    let (s, m) = reference_unit(DEFAULT_STEPS);
    let g3 = gamma_k(&m, &s, 3).unwrap();
    assert_eq!(alpha_k(g3, 3, 3, g3).unwrap(), 0.0);
    assert_eq!(alpha_k(g3, 3, 1, 5.0).unwrap(), 0.0);
    let gamma = 0.01;
    let g200 = gamma_k(&m, &s, 200).unwrap();
    let ratio = alpha_k(g200, 3, 200, gamma).unwrap() / (-gamma * 200f64.powi(3) / 2.0);
    assert!((0.95..=1.05).contains(&ratio), "{ratio}");
    // strictly decreasing in gamma
    let vals: Vec<f64> = [0.001, 0.002, 0.004].iter().map(|&gm| alpha_k(g3, 3, 3, gm).unwrap()).collect();
    assert!(vals.windows(2).all(|w| w[1] < w[0]));
}

#[test]
fn alpha_0_closed_form() {
    let (s, m) = reference_unit(DEFAULT_STEPS);
    let a0 = alpha_0(&m, &s).unwrap();
    assert!(a0 < 0.0);
    let integral = adapt(
        &|r: f64| if r == 0.0 { 0.0 } else { r.sinh() / r * r * r },
        0.0,
        1.0,
        1e-15,
    );
    let oracle = (1.0 - st_ref()) - (coth(1.0) - 1.0) / 1f64.sinh() * integral;
    assert!((a0 - oracle).abs() < 1e-8, "{a0} vs {oracle}");
    let b = alpha_0(&m.with_gamma(3.0), &s).unwrap();
    assert_eq!(a0.to_bits(), b.to_bits());
}

#[test]
fn gamma_star_stable_under_k_max() {
    let (s, m) = reference_unit(1024);
    let (g64, a64) = gamma_star(&m, &s, 64, true).unwrap();
    let (g128, a128) = gamma_star(&m, &s, 128, true).unwrap();
    assert_eq!(a64, a128);
    assert!((g64 - g128).abs() < 1e-12);
    assert!(g64 > 0.0);
    let rep = spectral_report(&m, &s, 64, 2.0 * g64, true).unwrap();
    assert!(rep.alpha_star < 0.0);
    assert!(gamma_star(&m, &s, 7, false).is_err());
}

#[test]
fn nu1_values() {
    let (s, m) = reference_unit(DEFAULT_STEPS);
    let v = nu1(&m, &s).unwrap();
    let pi2 = std::f64::consts::PI.powi(2);
    assert!((v + pi2 + 1.0).abs() < 1e-6, "{v}");

    // f' = 0: first Dirichlet eigenvalue of the unit ball
    let flat = TumorModel::new_unchecked(3, Expr::mul(Expr::Const(0.0), Expr::Var), m.g.clone(), 1.0, m.sigma_tilde, 0.0, 1.0);
    assert!((nu1(&flat, &s).unwrap() + pi2).abs() < 1e-6);
    let flat2 = TumorModel::new_unchecked(2, Expr::Const(0.0), m.g.clone(), 1.0, m.sigma_tilde, 0.0, 1.0);
    let j01 = 2.404_825_557_695_773f64;
    assert!((nu1(&flat2, &s).unwrap() + j01 * j01).abs() < 1e-6);
}

#[test]
fn c0_blows_up_at_threshold() {
    let (s, m) = reference_unit(1024);
    let rep = spectral_report(&m, &s, 32, 1.0, false).unwrap();
    let gs = rep.gamma_star;
    let c0s: Vec<f64> = [2.0, 1.5, 1.1]
        .iter()
        .map(|&f| rep.at_gamma(f * gs).c0.unwrap())
        .collect();
    assert!(c0s.windows(2).all(|w| w[1] > w[0]), "{c0s:?}");
    assert!(c0_bound(rep.nu1, rep.at_gamma(0.5 * gs).alpha_star).is_err());
}

#[test]
fn threshold_dichotomy() {
    let (s, m) = reference_unit(1024);
    let rep = spectral_report(&m, &s, 32, 1.0, false).unwrap();
    let gs = rep.gamma_star;
    let above = rep.at_gamma(1.01 * gs);
    assert!(above.rows.iter().filter(|r| r.k >= 2).all(|r| r.alpha_k < 0.0));
    assert!(above.unstable_modes().is_empty());
    let below = rep.at_gamma(0.99 * gs);
    assert!(below.alpha(below.argmax_k).unwrap() > 0.0);
    assert!(below.unstable_modes().contains(&below.argmax_k));
    // stored gamma_k reproduce alpha
    for r in above.rows.iter().filter(|r| r.k >= 2) {
        let a = alpha_k(r.gamma_k.unwrap(), 3, r.k, above.gamma).unwrap();
        assert!((a - r.alpha_k).abs() <= 1e-12 * a.abs().max(1.0));
    }
}

#[test]
fn physical_frame_rejected() {
    let m = reference_model(0.0, 1.0);
    let (_, _, phys) = solve_unit(&m, TOL, 256).unwrap();
    assert!(solve_ubar(&m, &phys, 2).is_err());
}
