//! Acceptance criteria on the reference model, each recomputed here against
//! test-local oracles. Prints one PASS/FAIL line per criterion.

mod common;

use std::time::{Duration, Instant};

use common::*;
use fbstab::acceptance::{run_suite, CheckConfig};
use fbstab::cmtoy;
use fbstab::config::TimeScheme;
use fbstab::eigenc::{self, solve_mode_eigen};
use fbstab::liegroup::{self, GraphFunction, SphereGrid};
use fbstab::modalsim::{self, assemble_mode_operator, ModeState};
use fbstab::model::reference_model;
use fbstab::radialsim::{self, RadialOptions};
use fbstab::spectrum::{self, gamma_star, spectral_report};
use fbstab::stationary::{solve_stationary, solve_unit, StationaryState, DEFAULT_STEPS};
use fbstab::TumorModel;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const R_S_TOL: f64 = 1e-8;
const SLOPE_TOL: f64 = 1e-7;
const GAMMA_K_REL: f64 = 1e-6;
const LAMBDA_1_TOL: f64 = 1e-8;
const CONSISTENCY_REL: f64 = 1e-3;
const RATE_REL: f64 = 0.01;
const RADIAL_R_TOL: f64 = 1e-5;
const RADIAL_RATE_REL: f64 = 0.05;
const GROUP_TOL: f64 = 1e-8;
const SPHERE_TOL: f64 = 1e-9;
const OMEGA_TOL: f64 = 1e-8;
const ANGLE_TOL: f64 = 1e-6;
const CM_RATE: (f64, f64) = (0.98, 1.02);
const IDENTITY_TOL: f64 = 1e-6;
const ASYMPTOTIC: (f64, f64) = (0.95, 1.05);
const GRID_N: usize = 2048;

struct Reference {
    unit: StationaryState,
    model: TumorModel,
    gamma_star: f64,
}

fn reference() -> Reference {
    let (unit, model, _) = solve_unit(&reference_model(0.0, 1.0), TOL, DEFAULT_STEPS).unwrap();
    let gamma_star = gamma_star(&model, &unit, 64, false).unwrap().0;
    Reference {
        unit,
        model,
        gamma_star,
    }
}

fn run(id: usize, title: &str, budget: u64, f: impl FnOnce() -> (bool, String)) -> bool {
    let start = Instant::now();
    let (ok, detail) = f();
    let secs = start.elapsed();
    let pass = ok && secs < Duration::from_secs(budget);
    println!(
        "{} {id:>2} {title}: {detail} ({:.2} s, budget {budget} s)",
        if pass { "PASS" } else { "FAIL" },
        secs.as_secs_f64()
    );
    pass
}

/// Root of `coth R - 1/R = sigma_tilde R / 3`.
fn radius_oracle() -> f64 {
    let st = st_ref();
    bisect(&|r: f64| coth(r) - 1.0 / r - st * r / 3.0, 0.5, 2.0)
}

fn c1_stationary() -> (bool, String) {
    let s = solve_stationary(&reference_model(0.0, 1.0), TOL).unwrap();
    let dr = (s.r_s - radius_oracle()).abs();
    let ds = (s.sigma_prime_boundary - (coth(1.0) - 1.0)).abs();
    (dr < R_S_TOL && ds < SLOPE_TOL, format!("|R_s - R*| = {dr:.2e}, |sigma_s'(1) - (coth 1 - 1)| = {ds:.2e}"))
}

fn c2_gamma_k(r: &Reference) -> (bool, String) {
    let worst = (2..=8)
        .map(|k| {
            let g = spectrum::gamma_k(&r.model, &r.unit, k).unwrap();
            let o = gamma_k_ref(k);
            ((g - o) / o).abs()
        })
        .fold(0.0, f64::max);
    (worst < GAMMA_K_REL, format!("max relative error {worst:.2e} for k = 2..8"))
}

fn c3_dichotomy(r: &Reference) -> (bool, String) {
    let c = 1e-3;
    let above = 2.0 * r.gamma_star;
    let rep = spectral_report(&r.model, &r.unit, 64, above, false).unwrap();
    let c0 = rep.c0.unwrap_or(0.0);
    let half = 0.5 * rep.alpha_star;
    let modes: Vec<usize> = (0..=16).collect();
    let lam = |gamma: f64, k: usize| solve_mode_eigen(&r.model, &r.unit, k, gamma, c, 1e-13).unwrap().lambda;
    let mut worst = f64::NEG_INFINITY;
    let mut lambda_1: f64 = 0.0;
    for &k in &modes {
        let l = lam(above, k);
        if k == 1 {
            lambda_1 = l;
        } else {
            worst = worst.max(l);
        }
    }
    let below = 0.5 * r.gamma_star;
    let positive: Vec<usize> = modes.iter().copied().filter(|&k| k != 1 && lam(below, k) > 0.0).collect();
    let pass = c < c0 && half < 0.0 && worst <= half && lambda_1.abs() < LAMBDA_1_TOL && !positive.is_empty();
    (
        pass,
        format!(
            "c0 = {c0:.3e}; gamma = 2 gamma_*: max lambda = {worst:.5e} <= {half:.5e}, lambda_1 = {lambda_1:.1e}; gamma = gamma_*/2: positive k {positive:?}"
        ),
    )
}

fn c4_consistency(r: &Reference) -> (bool, String) {
    let gamma = 2.0 * r.gamma_star;
    let mut gap: f64 = 0.0;
    for &c in &[1e-3, 1e-2] {
        for k in [0usize, 2, 3] {
            let fixed = solve_mode_eigen(&r.model, &r.unit, k, gamma, c, 1e-13).unwrap().lambda;
            let op = assemble_mode_operator(&r.model, &r.unit, k, gamma, c, GRID_N).unwrap();
            let dom = modalsim::dominant_eigen(&op).unwrap();
            gap = gap.max((dom.re - fixed).abs() / fixed.abs());
        }
    }
    (gap < CONSISTENCY_REL, format!("max relative gap {gap:.2e}"))
}

/// Least-squares slope of `-log v` against `t`.
fn log_slope(ts: &[f64], vs: &[f64]) -> f64 {
    let n = ts.len() as f64;
    let ls: Vec<f64> = vs.iter().map(|v| v.ln()).collect();
    let (mt, ml) = (ts.iter().sum::<f64>() / n, ls.iter().sum::<f64>() / n);
    let sxy: f64 = ts.iter().zip(&ls).map(|(t, l)| (t - mt) * (l - ml)).sum();
    let sxx: f64 = ts.iter().map(|t| (t - mt) * (t - mt)).sum();
    -sxy / sxx
}

fn c5_modal_rate(r: &Reference) -> (bool, String) {
    let gamma = 2.0 * r.gamma_star;
    let mut worst: f64 = 0.0;
    for &c in &[1e-3, 1e-2] {
        for k in [0usize, 2, 3] {
            let fixed = solve_mode_eigen(&r.model, &r.unit, k, gamma, c, 1e-13).unwrap().lambda;
            let op = assemble_mode_operator(&r.model, &r.unit, k, gamma, c, GRID_N).unwrap();
            let traj =
                modalsim::evolve_mode(&op, &ModeState::boundary_pulse(k), 0.01, 200.0, TimeScheme::BackwardEuler, 10)
                    .unwrap();
            let half = traj.t.len() / 2;
            let rate = log_slope(&traj.t[half..], &traj.norm[half..]);
            worst = worst.max((rate - fixed.abs()).abs() / fixed.abs());
        }
    }
    (worst < RATE_REL, format!("max relative rate error {worst:.2e}"))
}

fn c6_radial(r: &Reference) -> (bool, String) {
    let gamma = 2.0 * r.gamma_star;
    let c = 1e-3;
    let model = reference_model(c, gamma);
    let phys = solve_stationary(&model, TOL).unwrap();
    let r_s = radius_oracle();
    let lam = solve_mode_eigen(&r.model, &r.unit, 0, gamma, c, 1e-13).unwrap().lambda.abs();
    let opts = RadialOptions {
        intervals: GRID_N,
        t_end: 300.0,
        ..RadialOptions::default()
    };
    let traj = radialsim::run_radial(&model, &phys, gamma, 1.1 * r_s, None, &opts).unwrap();
    let dr = (traj.r.last().unwrap() - r_s).abs();
    let rate = radialsim::measure_rate(&traj.t, &traj.speed, 0.5).unwrap();
    let rel = (rate - lam).abs() / lam;
    let finished = traj.outcome == radialsim::RadialOutcome::Finished;
    (
        finished && dr < RADIAL_R_TOL && rel < RADIAL_RATE_REL,
        format!("|R - R_s| = {dr:.2e}, rate {rate:.5} vs |lambda_0| = {lam:.5} (rel {rel:.2e})"),
    )
}

fn random_rho(grid: &std::sync::Arc<SphereGrid>, rng: &mut ChaCha8Rng) -> GraphFunction {
    let mut c = vec![0.0; grid.basis_len()];
    for v in c.iter_mut().take(liegroup::basis_len(3, 4)) {
        *v = rng.gen_range(-1.0..1.0);
    }
    let g = GraphFunction::from_coeffs(grid, c).unwrap();
    let s = 0.045 / g.c1_norm();
    g.linear_combination(s, &GraphFunction::zero(grid), 0.0)
}

fn shift(rng: &mut ChaCha8Rng, len: f64) -> Vec<f64> {
    let v: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter().map(|x| len * x / n).collect()
}

fn c7_group() -> (bool, String) {
    let grid = SphereGrid::new(3, liegroup::DEFAULT_KMAX_3D).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let (eps, delta) = (liegroup::DEFAULT_EPSILON, liegroup::DEFAULT_DELTA);
    let t = |rho: &GraphFunction, z: &[f64]| liegroup::translate_graph(rho, z, eps, delta).unwrap();
    let (mut exact, mut group, mut inverse) = (true, 0.0f64, 0.0f64);
    for _ in 0..3 {
        let rho = random_rho(&grid, &mut rng);
        assert!(rho.c1_norm() < 0.05);
        exact &= t(&rho, &[0.0; 3]).coeffs() == rho.coeffs();
        let len_z = rng.gen_range(0.005..0.03);
        let len_w = rng.gen_range(0.005..0.03);
        let z = shift(&mut rng, len_z);
        let w = shift(&mut rng, len_w);
        let zw: Vec<f64> = z.iter().zip(&w).map(|(a, b)| a + b).collect();
        group = group.max(t(&t(&rho, &w), &z).sample_distance(&t(&rho, &zw)));
        let mz: Vec<f64> = z.iter().map(|v| -v).collect();
        inverse = inverse.max(t(&t(&rho, &z), &mz).sample_distance(&rho));
    }
    // generator of the translation of the unit sphere along e_1 is omega_1
    let errs: Vec<f64> = [1e-4, 1e-5]
        .iter()
        .map(|&e| {
            let g = liegroup::infinitesimal_generator(&grid, &[1.0, 0.0, 0.0], e).unwrap();
            (0..grid.len()).map(|i| (g.samples()[i] - grid.point(i)[0]).abs()).fold(0.0, f64::max)
        })
        .collect();
    let gen_ok = errs[0] <= 1e-8 && errs[1] <= 1e-10;
    let slope = (errs[0] / errs[1]).log10();
    (
        exact && group < GROUP_TOL && inverse < GROUP_TOL && gen_ok,
        format!(
            "S_0 = id: {exact}; group {group:.2e}; inverse {inverse:.2e}; generator error {:.2e} / {:.2e} at eps = 1e-4 / 1e-5 (<= eps^2, log-slope {slope:.2})",
            errs[0], errs[1]
        ),
    )
}

fn c8_sphere() -> (bool, String) {
    let grid = SphereGrid::new(3, liegroup::DEFAULT_KMAX_3D).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst: f64 = 0.0;
    for _ in 0..3 {
        let z = shift(&mut rng, 0.03);
        let s = liegroup::translate_graph(
            &GraphFunction::zero(&grid),
            &z,
            liegroup::DEFAULT_EPSILON,
            liegroup::DEFAULT_DELTA,
        )
        .unwrap();
        for i in 0..grid.len() {
            let p = grid.point(i);
            let zw: f64 = z.iter().zip(p).map(|(a, b)| a * b).sum();
            let oracle = zw + (1.0 - 0.03f64 * 0.03 + zw * zw).sqrt() - 1.0;
            worst = worst.max((s.samples()[i] - oracle).abs());
        }
    }
    (worst < SPHERE_TOL, format!("max deviation {worst:.2e} at |z| = 0.03"))
}

fn c9_cm() -> (bool, String) {
    let sys = cmtoy::builtin_rotation_example();
    let split = cmtoy::linearize(&sys, 1e-6).unwrap();
    let theta0: f64 = 0.7;
    let traj = cmtoy::integrate_flow(&sys, &[1.2 * theta0.cos(), 1.2 * theta0.sin()], 40.0, 1e-3, 1).unwrap();
    let id = cmtoy::limit_identify(&sys, &traj, &split).unwrap();
    // distance to the limit of r' = r(1 - r) decays like e^{-t}
    let (ts, ds): (Vec<f64>, Vec<f64>) = traj
        .t
        .iter()
        .zip(&traj.u)
        .filter(|(&t, _)| (5.0..=25.0).contains(&t))
        .map(|(&t, u)| (t, (u[0] - theta0.cos()).hypot(u[1] - theta0.sin())))
        .unzip();
    let rate = log_slope(&ts, &ds);
    let slice = cmtoy::integrate_flow(&sys, &[1.3, 0.0], 40.0, 1e-3, 1).unwrap();
    let residual = cmtoy::check_limit_identity(&sys, &slice, &split).unwrap();
    let angle = (id.sigma[0] - theta0).abs();
    let pass = split.kernel_dim() == 1
        && (split.omega_minus - 1.0).abs() <= OMEGA_TOL
        && angle <= ANGLE_TOL
        && (CM_RATE.0..=CM_RATE.1).contains(&rate)
        && residual < IDENTITY_TOL;
    (
        pass,
        format!(
            "kernel {}, omega_- = {:.10}, angle error {angle:.1e}, rate {rate:.4}, identity residual {residual:.1e}",
            split.kernel_dim(),
            split.omega_minus
        ),
    )
}

fn c10_asymptotics(r: &Reference) -> (bool, String) {
    let gamma = 2.0 * r.gamma_star;
    let k = 200;
    let a = spectrum::alpha_k(spectrum::gamma_k(&r.model, &r.unit, k).unwrap(), 3, k, gamma).unwrap();
    let ratio = a / (-gamma * (k as f64).powi(3) / 2.0);
    ((ASYMPTOTIC.0..=ASYMPTOTIC.1).contains(&ratio), format!("ratio {ratio:.5} at k = 200"))
}

#[test]
fn acceptance_criteria() {
    let r = reference();
    let mut pass = Vec::new();
    pass.push(run(1, "stationary oracle", 1, c1_stationary));
    pass.push(run(2, "spectrum oracle", 5, || c2_gamma_k(&r)));
    pass.push(run(3, "threshold dichotomy", 30, || c3_dichotomy(&r)));
    pass.push(run(4, "fixed point vs dominant eigenvalue", 60, || c4_consistency(&r)));
    pass.push(run(5, "modal decay rates", 60, || c5_modal_rate(&r)));
    pass.push(run(6, "nonlinear radial convergence", 60, || c6_radial(&r)));
    pass.push(run(7, "translation group properties", 10, c7_group));
    pass.push(run(8, "shifted sphere closed form", 5, c8_sphere));
    pass.push(run(9, "equivariant flow", 5, c9_cm));
    pass.push(run(10, "alpha_k asymptotics", 5, || c10_asymptotics(&r)));
    let failed: Vec<usize> = pass.iter().enumerate().filter(|(_, &p)| !p).map(|(i, _)| i + 1).collect();
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}

#[test]
fn check_runner_passes() {
    let results = run_suite(CheckConfig::default(), &[], |r| println!("{r}"));
    assert_eq!(results.len(), 10);
    let failed: Vec<usize> = results.iter().filter(|r| !r.pass).map(|r| r.id).collect();
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}

#[test]
fn eigen_rows_cover_all_listed_modes() {
    let r = reference();
    let gamma = 2.0 * r.gamma_star;
    let rep = spectral_report(&r.model, &r.unit, 64, gamma, false).unwrap();
    let results: Vec<_> = [0usize, 1, 2]
        .iter()
        .map(|&k| solve_mode_eigen(&r.model, &r.unit, k, gamma, 1e-3, eigenc::DEFAULT_TOL).unwrap())
        .collect();
    let check = eigenc::spectral_bound_check(&rep, &results, gamma, 1e-3);
    assert!(check.all_pass);
    assert_eq!(check.entries.len(), 3);
    assert!(check.positive_modes.is_empty());
}
