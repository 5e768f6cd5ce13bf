//! Acceptance suite run by `fbstab check`. Every criterion works on the
//! reference model (`n = 3`, `f = sigma`, `g = sigma - 3(coth 1 - 1)`,
//! `sigma_bar = 1`) and compares against closed forms or independent
//! computations.

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::cmtoy;
use crate::eigenc::{self, ModeDiscretization};
use crate::error::Result;
use crate::liegroup::{self, GraphFunction, SphereGrid};
use crate::modalsim::{self, assemble_mode_operator, ModeState};
use crate::model::{reference_model, TumorModel};
use crate::quad;
use crate::radialsim::{self, RadialOptions};
use crate::spectrum::{self, spectral_report, SpectralReport};
use crate::stationary::{self, solve_stationary, StationaryState};
use crate::config::TimeScheme;

#[derive(Debug, Clone)]
pub struct CheckConfig {
    pub grid_n: usize,
    pub stationary_steps: usize,
    pub seed: u64,
}

impl Default for CheckConfig {
    fn default() -> Self {
        CheckConfig {
            grid_n: 2048,
            stationary_steps: stationary::DEFAULT_STEPS,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CriterionResult {
    pub id: usize,
    pub title: &'static str,
    pub pass: bool,
    pub detail: String,
    pub seconds: f64,
}

impl std::fmt::Display for CriterionResult {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "[{}] {:>2} {} ({:.2} s): {}",
            if self.pass { "PASS" } else { "FAIL" },
            self.id,
            self.title,
            self.seconds,
            self.detail
        )
    }
}

pub struct Criterion {
    pub id: usize,
    pub title: &'static str,
    pub budget: Duration,
    run: fn(&mut Context) -> Result<(bool, String)>,
}

pub fn criteria() -> Vec<Criterion> {
    let c = |id, title, secs, run| Criterion {
        id,
        title,
        budget: Duration::from_secs(secs),
        run,
    };
    vec![
        c(1, "stationary radius and boundary slope", 1, crit_stationary),
        c(2, "gamma_k against power-series oracle", 5, crit_gamma_k),
        c(3, "threshold dichotomy", 30, crit_dichotomy),
        c(4, "fixed point vs dominant eigenvalue", 60, crit_consistency),
        c(5, "modal decay rates", 60, crit_modal_rate),
        c(6, "nonlinear radial convergence", 60, crit_radial),
        c(7, "translation group properties", 10, crit_group),
        c(8, "shifted sphere closed form", 5, crit_sphere),
        c(9, "finite-dimensional equivariant flow", 5, crit_cm),
        c(10, "alpha_k asymptotics", 5, crit_asymptotics),
    ]
}

/// Shared, lazily computed reference data.
pub struct Context {
    pub cfg: CheckConfig,
    unit: Option<(StationaryState, TumorModel)>,
    report: Option<SpectralReport>,
}

impl Context {
    pub fn new(cfg: CheckConfig) -> Self {
        Context {
            cfg,
            unit: None,
            report: None,
        }
    }

    fn unit(&mut self) -> Result<(StationaryState, TumorModel)> {
        if self.unit.is_none() {
            let (u, m, _) = stationary::solve_unit(&reference_model(0.0, 1.0), 1e-10, self.cfg.stationary_steps)?;
            self.unit = Some((u, m));
        }
        Ok(self.unit.clone().unwrap())
    }

    fn report(&mut self) -> Result<SpectralReport> {
        if self.report.is_none() {
            let (s, m) = self.unit()?;
            self.report = Some(spectral_report(&m, &s, 64, 1.0, false)?);
        }
        Ok(self.report.clone().unwrap())
    }
}

/// Run the selected criteria (all when `only` is empty), calling `sink`
/// after each one.
pub fn run_suite(cfg: CheckConfig, only: &[usize], mut sink: impl FnMut(&CriterionResult)) -> Vec<CriterionResult> {
    let mut ctx = Context::new(cfg);
    let mut out = Vec::new();
    for c in criteria() {
        if !only.is_empty() && !only.contains(&c.id) {
            continue;
        }
        let start = Instant::now();
        let res = (c.run)(&mut ctx);
        let elapsed = start.elapsed();
        let (pass, detail) = match res {
            Ok((p, d)) => {
                if p && elapsed > c.budget {
                    (false, format!("{d}; over time budget {:?}", c.budget))
                } else {
                    (p, d)
                }
            }
            Err(e) => (false, format!("error: {e}")),
        };
        let r = CriterionResult {
            id: c.id,
            title: c.title,
            pass,
            detail,
            seconds: elapsed.as_secs_f64(),
        };
        sink(&r);
        out.push(r);
    }
    out
}

fn coth(x: f64) -> f64 {
    1.0 / x.tanh()
}

fn crit_stationary(ctx: &mut Context) -> Result<(bool, String)> {
    let m = reference_model(0.0, 1.0);
    let s = solve_stationary(&m, 1e-10)?;
    // sigma_bar (coth R - 1/R) = sigma_tilde R / 3
    let st = m.sigma_tilde;
    let h = |r: f64| coth(r) - 1.0 / r - st * r / 3.0;
    let (mut a, mut b) = (0.5, 2.0);
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        if (h(mid) > 0.0) == (h(a) > 0.0) {
            a = mid;
        } else {
            b = mid;
        }
    }
    let r_oracle = 0.5 * (a + b);
    let dr = (s.r_s - r_oracle).abs();
    let ds = (s.sigma_prime_boundary - (coth(1.0) - 1.0)).abs();
    let _ = ctx;
    Ok((dr < 1e-8 && ds < 1e-7, format!("|R_s - R*| = {dr:.2e}, |sigma'(1) - (coth 1 - 1)| = {ds:.2e}")))
}

/// Power series of the regular solution of `u'' + a/r u' = u`.
pub fn ubar_series(a: f64, r: f64) -> f64 {
    let (mut c, mut sum, mut p) = (1.0, 1.0, 1.0);
    for m in 1..400 {
        c /= 2.0 * m as f64 * (2.0 * m as f64 - 1.0 + a);
        p *= r * r;
        let t = c * p;
        sum += t;
        if t.abs() < 1e-18 * sum.abs() {
            break;
        }
    }
    sum
}

fn gamma_k_oracle(k: usize) -> f64 {
    let n = 3.0;
    let kf = k as f64;
    let lambda = kf * (kf + n - 2.0);
    let a = 2.0 * kf + n - 1.0;
    let st = 3.0 * (coth(1.0) - 1.0);
    let integral = quad::adaptive(|r| ubar_series(a, r) * r.powf(a), 0.0, 1.0, 1e-15);
    let b = (1.0 - st) - (coth(1.0) - 1.0) / ubar_series(a, 1.0) * integral;
    (n - 1.0) / ((lambda - n + 1.0) * kf) * b
}

fn crit_gamma_k(ctx: &mut Context) -> Result<(bool, String)> {
    let (s, m) = ctx.unit()?;
    let mut worst: f64 = 0.0;
    for k in 2..=8 {
        let g = spectrum::gamma_k(&m, &s, k)?;
        let o = gamma_k_oracle(k);
        worst = worst.max(((g - o) / o).abs());
    }
    Ok((worst < 1e-6, format!("max relative error {worst:.2e} over k = 2..8")))
}

fn mode_results(
    m: &TumorModel,
    s: &StationaryState,
    grid_n: usize,
    gamma: f64,
    c: f64,
    modes: &[usize],
) -> Result<Vec<eigenc::EigenModeResult>> {
    use rayon::prelude::*;
    modes
        .par_iter()
        .map(|&k| {
            let disc = ModeDiscretization::new(m, s, k, grid_n)?;
            let alpha = eigenc::alpha_for_mode(m, s, k, gamma)?;
            eigenc::solve_mode_eigen_on(&disc, alpha, gamma, c, 1e-13, eigenc::DEFAULT_MAX_ITER)
        })
        .collect()
}

fn crit_dichotomy(ctx: &mut Context) -> Result<(bool, String)> {
    let (s, m) = ctx.unit()?;
    let rep = ctx.report()?;
    let gs = rep.gamma_star;
    let c = 1e-3;
    let mut modes = vec![0usize, 1];
    modes.extend(2..=16);
    let above = mode_results(&m, &s, ctx.cfg.grid_n, 2.0 * gs, c, &modes)?;
    let check_above = eigenc::spectral_bound_check(&rep, &above, 2.0 * gs, c);
    let below = mode_results(&m, &s, ctx.cfg.grid_n, 0.5 * gs, c, &modes)?;
    let check_below = eigenc::spectral_bound_check(&rep, &below, 0.5 * gs, c);
    let neg_bound = check_above.half_alpha_star < 0.0;
    let pass = check_above.all_pass && neg_bound && !check_below.positive_modes.is_empty();
    let worst = above
        .iter()
        .filter(|r| r.k != 1)
        .map(|r| r.lambda)
        .fold(f64::NEG_INFINITY, f64::max);
    Ok((
        pass,
        format!(
            "gamma = 2 gamma_*: max lambda = {worst:.4e} <= {:.4e}; gamma = gamma_*/2: positive modes {:?}",
            check_above.half_alpha_star, check_below.positive_modes
        ),
    ))
}

fn crit_consistency(ctx: &mut Context) -> Result<(bool, String)> {
    let (s, m) = ctx.unit()?;
    let gamma = 2.0 * ctx.report()?.gamma_star;
    let mut worst: f64 = 0.0;
    for &c in &[1e-3, 1e-2] {
        for &k in &[0usize, 2, 3] {
            let fixed = eigenc::solve_mode_eigen(&m, &s, k, gamma, c, 1e-13)?;
            let op = assemble_mode_operator(&m, &s, k, gamma, c, ctx.cfg.grid_n.min(modalsim::MAX_DENSE_GRID))?;
            let dom = modalsim::dominant_eigen(&op)?;
            worst = worst.max((dom.re - fixed.lambda).abs() / fixed.lambda.abs());
        }
    }
    Ok((worst < 1e-3, format!("max relative gap {worst:.2e}")))
}

fn crit_modal_rate(ctx: &mut Context) -> Result<(bool, String)> {
    let (s, m) = ctx.unit()?;
    let gamma = 2.0 * ctx.report()?.gamma_star;
    let mut worst: f64 = 0.0;
    for &c in &[1e-3, 1e-2] {
        for &k in &[0usize, 2, 3] {
            let fixed = eigenc::solve_mode_eigen(&m, &s, k, gamma, c, 1e-13)?;
            let op = assemble_mode_operator(&m, &s, k, gamma, c, ctx.cfg.grid_n.min(modalsim::MAX_DENSE_GRID))?;
            let traj = modalsim::evolve_mode(&op, &ModeState::boundary_pulse(k), 0.01, 200.0, TimeScheme::BackwardEuler, 10)?;
            let rate = radialsim::measure_rate(&traj.t, &traj.norm, 0.5)?;
            worst = worst.max((rate - fixed.lambda.abs()).abs() / fixed.lambda.abs());
        }
    }
    Ok((worst < 0.01, format!("max relative rate error {worst:.2e}")))
}

fn crit_radial(ctx: &mut Context) -> Result<(bool, String)> {
    let (s, um) = ctx.unit()?;
    let gamma = 2.0 * ctx.report()?.gamma_star;
    let c = 1e-3;
    let model = reference_model(c, gamma);
    let phys = solve_stationary(&model, 1e-10)?;
    let lam = eigenc::solve_mode_eigen(&um, &s, 0, gamma, c, 1e-13)?.lambda;
    let opts = RadialOptions {
        intervals: ctx.cfg.grid_n,
        dt: radialsim::DEFAULT_DT,
        t_end: 300.0,
        stride: 10,
        ..RadialOptions::default()
    };
    let traj = radialsim::run_radial(&model, &phys, gamma, 1.1 * phys.r_s, None, &opts)?;
    let sum = traj.summary(phys.r_s, 0.5, 1e-5);
    let dr = (sum.final_r - phys.r_s).abs();
    let rel = (sum.rate - lam.abs()).abs() / lam.abs();
    Ok((
        sum.converged && dr < 1e-5 && rel < 0.05,
        format!("|R - R_s| = {dr:.2e}, rate {:.5} vs |lambda_0| = {:.5} (rel {rel:.2e})", sum.rate, lam.abs()),
    ))
}

fn random_graph(grid: &std::sync::Arc<SphereGrid>, rng: &mut ChaCha8Rng, degree: usize, target_c1: f64) -> GraphFunction {
    let nb = grid.basis_len();
    let count = liegroup::basis_len(grid.n, degree);
    let mut c = vec![0.0; nb];
    for v in c.iter_mut().take(count) {
        *v = rng.gen_range(-1.0..1.0);
    }
    let g = GraphFunction::from_coeffs(grid, c).expect("sized");
    let scale = target_c1 / g.c1_norm();
    g.linear_combination(scale, &GraphFunction::zero(grid), 0.0)
}

fn random_shift(rng: &mut ChaCha8Rng, n: usize, radius: f64) -> Vec<f64> {
    let v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let r = radius * rng.gen_range(0.2..1.0);
    v.iter().map(|x| x * r / norm).collect()
}

fn crit_group(ctx: &mut Context) -> Result<(bool, String)> {
    let grid = SphereGrid::new(3, liegroup::DEFAULT_KMAX_3D)?;
    let mut rng = ChaCha8Rng::seed_from_u64(ctx.cfg.seed);
    let (eps, delta) = (liegroup::DEFAULT_EPSILON, liegroup::DEFAULT_DELTA);
    let mut identity_exact = true;
    let (mut group, mut inverse): (f64, f64) = (0.0, 0.0);
    for _ in 0..3 {
        let rho = random_graph(&grid, &mut rng, 4, 0.04);
        let id = liegroup::translate_graph(&rho, &[0.0; 3], eps, delta)?;
        identity_exact &= id.coeffs() == rho.coeffs();
        let z = random_shift(&mut rng, 3, 0.03);
        let w = random_shift(&mut rng, 3, 0.03);
        let zw: Vec<f64> = z.iter().zip(&w).map(|(a, b)| a + b).collect();
        let lhs = liegroup::translate_graph(&liegroup::translate_graph(&rho, &w, eps, delta)?, &z, eps, delta)?;
        let rhs = liegroup::translate_graph(&rho, &zw, eps, delta)?;
        group = group.max(lhs.sample_distance(&rhs));
        let mz: Vec<f64> = z.iter().map(|v| -v).collect();
        let back = liegroup::translate_graph(&liegroup::translate_graph(&rho, &z, eps, delta)?, &mz, eps, delta)?;
        inverse = inverse.max(back.sample_distance(&rho));
    }
    // generator: central difference against z . omega
    let z = [1.0, 0.0, 0.0];
    let exact = GraphFunction::from_fn(&grid, |p| p[0]);
    let mut gen_ok = true;
    let mut errs = Vec::new();
    for e in [1e-4, 1e-5] {
        let g = liegroup::infinitesimal_generator(&grid, &z, e)?;
        let err = g.sample_distance(&exact);
        gen_ok &= err <= e * e;
        errs.push(err);
    }
    let slope = (errs[0] / errs[1]).log10();
    Ok((
        identity_exact && group < 1e-8 && inverse < 1e-8 && gen_ok,
        format!(
            "S_0 exact: {identity_exact}; group {group:.2e}; inverse {inverse:.2e}; generator errors {:.2e}, {:.2e} (bound eps^2, observed log-slope {slope:.2})",
            errs[0], errs[1]
        ),
    ))
}

fn crit_sphere(ctx: &mut Context) -> Result<(bool, String)> {
    let grid = SphereGrid::new(3, liegroup::DEFAULT_KMAX_3D)?;
    let mut rng = ChaCha8Rng::seed_from_u64(ctx.cfg.seed.wrapping_add(1));
    let mut worst: f64 = 0.0;
    for _ in 0..3 {
        let v: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let nv = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        let z: Vec<f64> = v.iter().map(|x| 0.03 * x / nv).collect();
        let s = liegroup::translate_graph(&GraphFunction::zero(&grid), &z, liegroup::DEFAULT_EPSILON, liegroup::DEFAULT_DELTA)?;
        for i in 0..grid.len() {
            let p = grid.point(i);
            let zw: f64 = z.iter().zip(p).map(|(a, b)| a * b).sum();
            let oracle = zw + (1.0 - 0.03f64.powi(2) + zw * zw).sqrt() - 1.0;
            worst = worst.max((s.samples()[i] - oracle).abs());
        }
    }
    Ok((worst < 1e-9, format!("max deviation {worst:.2e} at |z| = 0.03")))
}

fn crit_cm(_ctx: &mut Context) -> Result<(bool, String)> {
    let theta0 = 0.7;
    let rep = cmtoy::cm_demo(1.2, theta0, 1.3, 40.0, 1e-3)?;
    let sig = rep.sigma_hat[0];
    let pass = rep.kernel_dim == 1
        && (rep.omega_minus - 1.0).abs() <= 1e-8
        && (sig - theta0).abs() <= 1e-6
        && (0.98..=1.02).contains(&rep.rate_measured)
        && rep.identity_residual < 1e-6;
    Ok((
        pass,
        format!(
            "kernel {}, omega_- = {:.10}, sigma = {sig:.9}, rate {:.4}, identity residual {:.2e}",
            rep.kernel_dim, rep.omega_minus, rep.rate_measured, rep.identity_residual
        ),
    ))
}

fn crit_asymptotics(ctx: &mut Context) -> Result<(bool, String)> {
    let (s, m) = ctx.unit()?;
    let gamma = 2.0 * ctx.report()?.gamma_star;
    let k = 200;
    let a = spectrum::alpha_k(spectrum::gamma_k(&m, &s, k)?, 3, k, gamma)?;
    let ratio = a / (-gamma * (k as f64).powi(3) / 2.0);
    Ok(((0.95..=1.05).contains(&ratio), format!("ratio {ratio:.5} at k = 200")))
}
