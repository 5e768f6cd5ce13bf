mod common;

use common::*;
use fbstab::config::ConfigMap;
use fbstab::model::{build_model, reference_model};
use fbstab::stationary::{
    integrate_sigma, mass_balance, pressure_profile, rescale_to_unit, solve_stationary, solve_stationary_steps, Frame,
};
use fbstab::{RadialFunction, TumorModel};

fn model_with_tilde(st: f64) -> TumorModel {
    let text = format!("n = 3\nf = sigma\ng = sigma - {st:?}\nsigma_bar = 1\ngamma = 1\n");
    build_model(&ConfigMap::parse(&text).unwrap()).unwrap()
}

#[test]
fn reference_profile_matches_closed_form() {
    let m = reference_model(0.0, 1.0);
    let sc = 1.0 / 1f64.sinh();
    let (prof, hit) = integrate_sigma(&m, sc, 2.0).unwrap();
    assert!((hit.unwrap() - 1.0).abs() < 1e-10);
    let err = prof
        .nodes()
        .iter()
        .zip(prof.values())
        .map(|(&r, &v)| (v - sigma_ref(r)).abs())
        .fold(0.0, f64::max);
    assert!(err < 1e-12, "{err}");
}

#[test]
fn hit_radius_grows_as_center_decreases() {
    let m = reference_model(0.0, 1.0);
    let mut last = 0.0;
    for sc in [0.8, 0.7, 0.6] {
        let (_, hit) = integrate_sigma(&m, sc, 4.0).unwrap();
        let hit = hit.unwrap();
        // sigma = sc sinh r / r reaches 1
        let oracle = bisect(&|r: f64| sc * r.sinh() / r - 1.0, 1e-6, 4.0);
        assert!((hit - oracle).abs() < 1e-9, "{sc}: {hit} vs {oracle}");
        assert!(hit > last);
        last = hit;
    }
}

#[test]
fn no_hit_before_r_max() {
    let m = reference_model(0.0, 1.0);
    let (_, hit) = integrate_sigma(&m, 0.5, 0.5).unwrap();
    assert!(hit.is_none());
}

#[test]
fn reference_stationary_state() {
    let m = reference_model(0.0, 1.0);
    let s = solve_stationary(&m, TOL).unwrap();
    assert!((s.r_s - 1.0).abs() < 1e-8);
    assert!((s.sigma_center - 1.0 / 1f64.sinh()).abs() < 1e-8);
    assert!((s.sigma_prime_boundary - (coth(1.0) - 1.0)).abs() < 1e-7);
    assert!(s.mass_balance_residual.abs() < 1e-9);
    assert!((s.sigma_s.last_value() - 1.0).abs() < 1e-10);
    assert_eq!(s.frame, Frame::Physical);
    // strict monotonicity, bounded by center and boundary values
    let v = s.sigma_s.values();
    assert!(v.windows(2).all(|w| w[1] > w[0]));
    assert!(v[1..v.len() - 1].iter().all(|&x| x > s.sigma_center && x < 1.0));
}

#[test]
fn transcendental_radius() {
    let m = model_with_tilde(0.5);
    let s = solve_stationary(&m, TOL).unwrap();
    let oracle = bisect(&|r: f64| coth(r) - 1.0 / r - r / 6.0, 0.1, 10.0);
    assert!((s.r_s - oracle).abs() < 1e-8, "{} vs {oracle}", s.r_s);
}

#[test]
fn tolerance_self_convergence() {
    let m = model_with_tilde(0.5);
    let a = solve_stationary(&m, 1e-8).unwrap();
    let b = solve_stationary(&m, 1e-10).unwrap();
    assert!((a.r_s - b.r_s).abs() < 1e-9);
}

#[test]
fn rk4_order() {
    let m = reference_model(0.0, 1.0);
    let errs: Vec<f64> = [16usize, 32, 64]
        .iter()
        .map(|&n| (solve_stationary_steps(&m, 1e-14, n).unwrap().r_s - 1.0).abs())
        .collect();
    for w in errs.windows(2) {
        let slope = (w[0] / w[1]).log2();
        assert!((3.5..=4.5).contains(&slope), "errors {errs:?}, slope {slope}");
    }
}

#[test]
fn invariant_under_scaling_g() {
    let m = reference_model(0.0, 1.0);
    let a = solve_stationary(&m, TOL).unwrap();
    let b = solve_stationary(&m.with_scaled_g(7.5), TOL).unwrap();
    assert!((a.r_s - b.r_s).abs() < 1e-10);
    assert!(a.sigma_s.max_abs_diff(&b.sigma_s) < 1e-10);
}

#[test]
fn mass_balance_values() {
    let m = reference_model(0.0, 1.0);
    let s = solve_stationary(&m, TOL).unwrap();
    assert!(mass_balance(&m, &s.sigma_s, 1.0).unwrap().abs() < 1e-9);

    let flat = RadialFunction::from_fn(1.0, 16, |_| m.sigma_tilde);
    assert_eq!(mass_balance(&m, &flat, 1.0).unwrap(), 0.0);

    // int_0^R (sinh r/(r sinh 1) - st) r^2 dr
    let half = RadialFunction::from_fn(0.5, 512, sigma_ref);
    let oracle = adapt(&|r: f64| (sigma_ref(r) - st_ref()) * r * r, 0.0, 0.5, 1e-15);
    let mb = mass_balance(&m, &half, 0.5).unwrap();
    assert!(mb < 0.0);
    assert!((mb - oracle).abs() < 1e-12, "{mb} vs {oracle}");

    let coarse = RadialFunction::from_fn(1.0, 4, sigma_ref);
    assert!(mass_balance(&m, &coarse, 1.0).is_err());
}

#[test]
fn pressure_matches_quadrature() {
    let m = reference_model(0.0, 1.0);
    let s = solve_stationary(&m, TOL).unwrap();
    let p = pressure_profile(&s, &m).unwrap();
    assert!((p.last_value() - 1.0 / s.r_s).abs() < 1e-15);
    let dp = p.derivs().unwrap();
    assert!(dp.last().unwrap().abs() < 1e-8);
    let st = st_ref();
    let oracle = |r: f64| -((r * r.cosh() - r.sinh()) / 1f64.sinh() - st * r.powi(3) / 3.0) / (r * r);
    let err = p
        .nodes()
        .iter()
        .zip(dp)
        .skip(1)
        .map(|(&r, &d)| (d - oracle(r)).abs())
        .fold(0.0, f64::max);
    assert!(err < 1e-7, "{err}");
}

#[test]
fn rescaling() {
    let m = reference_model(0.0, 1.0);
    let s = solve_stationary(&m, TOL).unwrap();
    let (u, um) = rescale_to_unit(&s, &m);
    assert_eq!(u.frame, Frame::Unit);
    assert!(u.sigma_s.max_abs_diff(&s.sigma_s) < 1e-10);
    assert!((um.f_at(0.3).unwrap() - m.f_at(0.3).unwrap()).abs() < 1e-7);

    let m = model_with_tilde(0.5);
    let s = solve_stationary(&m, TOL).unwrap();
    assert!((s.r_s - 1.0).abs() > 0.1);
    let (u, um) = rescale_to_unit(&s, &m);
    assert_eq!(u.r_s, 1.0);
    assert!((u.sigma_s.r_end() - 1.0).abs() < 1e-15);
    assert!((u.sigma_s.last_value() - 1.0).abs() < 1e-10);
    assert!(u.sigma_s.values().windows(2).all(|w| w[1] > w[0]));
    assert!(mass_balance(&um, &u.sigma_s, 1.0).unwrap().abs() < 1e-9);
    assert!((u.p_s.last_value() - um.gamma).abs() < 1e-14);
    assert!(u.p_s.derivs().unwrap().last().unwrap().abs() < 1e-8);
    // independent re-solve in the rescaled frame
    let again = solve_stationary(&um, TOL).unwrap();
    assert!((again.r_s - 1.0).abs() < 1e-8);
    assert!((again.sigma_prime_boundary - u.sigma_prime_boundary).abs() < 1e-7);
}

#[test]
fn deterministic() {
    let m = reference_model(0.0, 1.0);
    let a = solve_stationary(&m, TOL).unwrap();
    let b = solve_stationary(&m, TOL).unwrap();
    assert_eq!(a.sigma_s, b.sigma_s);
    assert_eq!(a.r_s.to_bits(), b.r_s.to_bits());
}
