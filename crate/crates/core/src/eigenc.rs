//! Eigenvalues `lambda_{k,gamma}(c) = alpha_{k,gamma} + c mu` of the full
//! linearization for small `c > 0`, obtained from the scalar fixed-point
//! problem for the bulk profile `a`:
//!
//! ```text
//! L_k^f a = -c s1 J_k(a) w_k + c alpha a + c^2 J_k(a) a - s1 alpha w_k,
//! a'(0) = 0 (k = 0) or a(0) = 0 (k >= 1),  a(1) = 0,
//! ```
//!
//! where `L_k^f = d^2/dr^2 + (n-1)/r d/dr - lambda_k / r^2 - f'(sigma_s)`,
//! `s1 = sigma_s'(1)`, `w_k` is the normalized regular solution of
//! `L_k^f w = 0`, and `J_k(u) = v'(1)` for `L_k^0 v = g'(sigma_s) u`,
//! `v(1) = 0`.
//!
//! All radial operators are second-order finite differences on a uniform
//! grid of `[0, 1]`; the modal simulator reuses the same discretization so
//! that a converged fixed point is an exact eigenpair of its matrix.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{dot, norm_inf, Tridiagonal};
use crate::liegroup::CutoffProfile;
use crate::model::TumorModel;
use crate::radial::RadialFunction;
use crate::spectrum::{self, mode_constants, solve_ubar};
use crate::stationary::{Frame, StationaryState};

/// Default number of radial intervals.
pub const DEFAULT_GRID: usize = 2048;
pub const DEFAULT_MAX_ITER: usize = 200;
pub const DEFAULT_TOL: f64 = 1e-13;

/// Fourth-order one-sided weights for `v'(1)` with `v(1) = 0`, applied to
/// `v_{N-1}, ..., v_{N-4}` (to be divided by `12 h`).
const BOUNDARY_STENCIL: [f64; 4] = [-48.0, 36.0, -16.0, 3.0];

/// Regular solution `w_k` of `L_k^f w = 0` with `w_k(1) = 1`, obtained as
/// `r^k ubar_k(r) / ubar_k(1)` on the stationary grid.
pub fn solve_wk(model: &TumorModel, state: &StationaryState, k: usize) -> Result<RadialFunction> {
    let ubar = solve_ubar(model, state, k)?;
    let u1 = ubar.last_value();
    let du = ubar.derivs().unwrap();
    let kk = k as i32;
    let mut vals = Vec::with_capacity(ubar.len());
    let mut ders = Vec::with_capacity(ubar.len());
    for ((&r, &u), &d) in ubar.nodes().iter().zip(ubar.values()).zip(du) {
        let rk = r.powi(kk);
        let drk = if k == 0 { 0.0 } else { k as f64 * r.powi(kk - 1) };
        vals.push(rk * u / u1);
        ders.push((drk * u + rk * d) / u1);
    }
    if !vals.iter().all(|v| v.is_finite()) {
        return Err(Error::numerical(format!("w_{k} blew up")));
    }
    let n = vals.len();
    vals[n - 1] = 1.0;
    RadialFunction::new(ubar.nodes().to_vec(), vals, Some(ders))
}

/// Finite-difference setting for one spherical-harmonic degree.
///
/// Unknowns are the nodal values at `r_j = j h`, `j = first..N-1`, with
/// `first = 0` for `k = 0` and `first = 1` otherwise; `v_N = 0` always.
#[derive(Debug, Clone)]
pub struct ModeDiscretization {
    pub n: usize,
    pub k: usize,
    pub intervals: usize,
    pub h: f64,
    pub first: usize,
    /// Node radii of the unknowns.
    pub r: Vec<f64>,
    /// `L_k^f` on the unknowns.
    pub lf: Tridiagonal,
    /// Row vector of the discrete `J_k` on the unknowns.
    pub j_row: Vec<f64>,
    /// `w_k` at the unknowns.
    pub w: Vec<f64>,
    /// `sigma_s'(1)` in the unit frame.
    pub sigma_prime: f64,
}

fn laplacian(n: usize, k: usize, intervals: usize, extra: &[f64]) -> Tridiagonal {
    let h = 1.0 / intervals as f64;
    let first = usize::from(k != 0);
    let m = intervals - first;
    let lambda = (k * k + (n - 2) * k) as f64;
    let nm1 = n as f64 - 1.0;
    let ih2 = 1.0 / (h * h);
    let mut t = Tridiagonal::zeros(m);
    for i in 0..m {
        let j = i + first;
        if j == 0 {
            // even extension: Delta v(0) ~ 2n (v_1 - v_0) / h^2
            t.diag[i] = -2.0 * n as f64 * ih2 - extra[i];
            t.upper[i] = 2.0 * n as f64 * ih2;
            continue;
        }
        let r = j as f64 * h;
        t.lower[i] = ih2 - nm1 / (2.0 * r * h);
        t.diag[i] = -2.0 * ih2 - lambda / (r * r) - extra[i];
        t.upper[i] = ih2 + nm1 / (2.0 * r * h);
    }
    t
}

impl ModeDiscretization {
    pub fn new(model: &TumorModel, state: &StationaryState, k: usize, intervals: usize) -> Result<Self> {
        if state.frame != Frame::Unit {
            return Err(Error::invalid("mode operators are assembled in the unit frame; rescale first"));
        }
        if intervals < 8 {
            return Err(Error::invalid("radial grid needs at least 8 intervals"));
        }
        let n = model.n;
        let h = 1.0 / intervals as f64;
        let first = usize::from(k != 0);
        let r: Vec<f64> = (first..intervals).map(|j| j as f64 * h).collect();
        let sig: Vec<f64> = r.iter().map(|&x| state.sigma_s.eval(x)).collect();
        let fp = sig.iter().map(|&s| model.df_at(s)).collect::<Result<Vec<f64>>>()?;
        let gp = sig.iter().map(|&s| model.dg_at(s)).collect::<Result<Vec<f64>>>()?;
        let lf = laplacian(n, k, intervals, &fp);
        let l0 = laplacian(n, k, intervals, &vec![0.0; r.len()]);

        // J(u) = s . (L0^{-1} G u)  =>  row = G L0^{-T} s
        let m = r.len();
        let mut s = vec![0.0; m];
        for (o, wgt) in BOUNDARY_STENCIL.iter().enumerate() {
            let j = intervals - 1 - o;
            if j >= first {
                s[j - first] = wgt / (12.0 * h);
            }
        }
        let y = l0.transpose().solve(&s)?;
        let j_row: Vec<f64> = y.iter().zip(&gp).map(|(a, b)| a * b).collect();

        let wk = solve_wk(model, state, k)?;
        let w: Vec<f64> = r.iter().map(|&x| wk.eval(x)).collect();
        Ok(ModeDiscretization {
            n,
            k,
            intervals,
            h,
            first,
            r,
            lf,
            j_row,
            w,
            sigma_prime: state.sigma_prime_boundary,
        })
    }

    pub fn unknowns(&self) -> usize {
        self.r.len()
    }

    /// Discrete `J_k` applied to nodal values on the unknowns.
    pub fn apply_j(&self, u: &[f64]) -> f64 {
        dot(&self.j_row, u)
    }

    /// Nodal values of `u` on the unknowns.
    pub fn sample(&self, u: &RadialFunction) -> Vec<f64> {
        self.r.iter().map(|&x| u.eval(x)).collect()
    }

    /// Extend values on the unknowns to a profile on all nodes of `[0, 1]`.
    pub fn to_profile(&self, v: &[f64]) -> RadialFunction {
        let mut vals = Vec::with_capacity(self.intervals + 1);
        if self.first == 1 {
            vals.push(0.0);
        }
        vals.extend_from_slice(v);
        vals.push(0.0);
        RadialFunction::uniform(1.0, vals, None).expect("uniform grid")
    }

    fn rhs(&self, a: &[f64], mu: f64, alpha: f64, c: f64) -> Vec<f64> {
        let s1 = self.sigma_prime;
        a.iter()
            .zip(&self.w)
            .map(|(&ai, &wi)| -c * s1 * mu * wi + c * alpha * ai + c * c * mu * ai - s1 * alpha * wi)
            .collect()
    }
}

/// `J_k(u) = v'(1)` on the default grid.
pub fn apply_jk(model: &TumorModel, state: &StationaryState, k: usize, u: &RadialFunction) -> Result<f64> {
    let d = ModeDiscretization::new(model, state, k, DEFAULT_GRID)?;
    Ok(d.apply_j(&d.sample(u)))
}

#[derive(Debug, Clone)]
pub struct EigenModeResult {
    pub k: usize,
    pub c: f64,
    pub gamma: f64,
    pub alpha_k: f64,
    pub a_profile: RadialFunction,
    pub mu: f64,
    pub lambda: f64,
    pub iterations: usize,
    pub residual: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct EigenRow {
    pub k: usize,
    pub c: f64,
    pub gamma: f64,
    pub alpha_k: f64,
    pub mu: f64,
    pub lambda: f64,
    pub iterations: usize,
    pub residual: f64,
}

impl EigenModeResult {
    pub fn row(&self) -> EigenRow {
        EigenRow {
            k: self.k,
            c: self.c,
            gamma: self.gamma,
            alpha_k: self.alpha_k,
            mu: self.mu,
            lambda: self.lambda,
            iterations: self.iterations,
            residual: self.residual,
        }
    }
}

/// `alpha_{k,gamma}` of the `c = 0` spectrum for any `k`.
pub fn alpha_for_mode(model: &TumorModel, state: &StationaryState, k: usize, gamma: f64) -> Result<f64> {
    match k {
        0 => spectrum::alpha_0(model, state),
        1 => Ok(0.0),
        _ => spectrum::alpha_k(spectrum::gamma_k(model, state, k)?, model.n, k, gamma),
    }
}

/// Fixed-point residual `max |a - (L_k^f)^{-1} RHS(a, J a)|`.
pub fn fixed_point_residual(disc: &ModeDiscretization, a: &[f64], alpha: f64, c: f64) -> Result<f64> {
    let mu = disc.apply_j(a);
    let next = disc.lf.solve(&disc.rhs(a, mu, alpha, c))?;
    Ok(a.iter().zip(&next).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max))
}

/// Solve the scalar fixed-point problem on a prepared discretization.
pub fn solve_mode_eigen_on(
    disc: &ModeDiscretization,
    alpha: f64,
    gamma: f64,
    c: f64,
    tol: f64,
    max_iter: usize,
) -> Result<EigenModeResult> {
    if !(c > 0.0) {
        return Err(Error::invalid(format!("c = {c} must be positive")));
    }
    if !(tol > 0.0) {
        return Err(Error::invalid("tolerance must be positive"));
    }
    if disc.k == 1 {
        let zeros = vec![0.0; disc.unknowns()];
        return Ok(EigenModeResult {
            k: 1,
            c,
            gamma,
            alpha_k: 0.0,
            a_profile: disc.to_profile(&zeros),
            mu: 0.0,
            lambda: 0.0,
            iterations: 0,
            residual: 0.0,
        });
    }
    let lu = disc.lf.factor()?;
    let mut a = lu.solve(&disc.rhs(&vec![0.0; disc.unknowns()], 0.0, alpha, c));
    let mut mu = disc.apply_j(&a);
    let mut damping = 1.0;
    let mut last_step = 0.0;
    for it in 1..=max_iter {
        let next = lu.solve(&disc.rhs(&a, mu, alpha, c));
        let cand: Vec<f64> = a.iter().zip(&next).map(|(x, y)| x + damping * (y - x)).collect();
        let new_mu = disc.apply_j(&cand);
        let step = new_mu - mu;
        if !new_mu.is_finite() {
            break;
        }
        if step * last_step < 0.0 && damping == 1.0 {
            log::debug!("mode {}: iterates oscillate, damping with 0.5", disc.k);
            damping = 0.5;
        }
        last_step = step;
        a = cand;
        mu = new_mu;
        if step.abs() < tol {
            let residual = fixed_point_residual(disc, &a, alpha, c)?;
            return Ok(EigenModeResult {
                k: disc.k,
                c,
                gamma,
                alpha_k: alpha,
                a_profile: disc.to_profile(&a),
                mu,
                lambda: alpha + c * mu,
                iterations: it,
                residual,
            });
        }
    }
    Err(Error::NoConvergence {
        what: "eigenvalue fixed point",
        iterations: max_iter,
        residual: last_step.abs(),
    })
}

/// `lambda_{k,gamma}(c)` on the default grid. `k = 1` returns the neutral
/// translation mode `lambda = 0` with a vanishing bulk profile.
pub fn solve_mode_eigen(
    model: &TumorModel,
    state: &StationaryState,
    k: usize,
    gamma: f64,
    c: f64,
    tol: f64,
) -> Result<EigenModeResult> {
    let disc = ModeDiscretization::new(model, state, k, DEFAULT_GRID)?;
    let alpha = alpha_for_mode(model, state, k, gamma)?;
    solve_mode_eigen_on(&disc, alpha, gamma, c, tol, DEFAULT_MAX_ITER)
}

/// Bulk component, in the Hanzawa-pulled-back variables, of the mode-`k`
/// eigenvector `(c a, eta)`:
/// `c a - s1 w_k eta + phi(r - 1) r^k sigma_s'(r) eta`.
pub fn pulled_back_bulk(
    disc: &ModeDiscretization,
    state: &StationaryState,
    cutoff: &CutoffProfile,
    c_a: &[f64],
    eta: f64,
) -> Vec<f64> {
    disc.r
        .iter()
        .enumerate()
        .map(|(i, &r)| {
            c_a[i] - disc.sigma_prime * disc.w[i] * eta
                + cutoff.eval(r - 1.0) * r.powi(disc.k as i32) * state.sigma_s.eval_deriv(r) * eta
        })
        .collect()
}

/// Translation direction `[phi(r - 1) r - 1] sigma_s'(r)` on the unknowns.
pub fn translation_profile(disc: &ModeDiscretization, state: &StationaryState, cutoff: &CutoffProfile) -> Vec<f64> {
    disc.r
        .iter()
        .map(|&r| (cutoff.eval(r - 1.0) * r - 1.0) * state.sigma_s.eval_deriv(r))
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundEntry {
    pub k: usize,
    pub lambda: f64,
    pub bound: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundReport {
    pub gamma: f64,
    pub c: f64,
    pub half_alpha_star: f64,
    pub entries: Vec<BoundEntry>,
    /// Modes with a positive eigenvalue.
    pub positive_modes: Vec<usize>,
    pub all_pass: bool,
}

/// Check `lambda_{k,gamma} <= alpha_star / 2` for every computed `k != 1`
/// and `lambda_1 = 0` (to 1e-8).
pub fn spectral_bound_check(
    report: &spectrum::SpectralReport,
    results: &[EigenModeResult],
    gamma: f64,
    c: f64,
) -> BoundReport {
    let rep = report.at_gamma(gamma);
    let bound = 0.5 * rep.alpha_star;
    let entries: Vec<BoundEntry> = results
        .iter()
        .map(|r| {
            let pass = if r.k == 1 { r.lambda.abs() <= 1e-8 } else { r.lambda <= bound };
            BoundEntry {
                k: r.k,
                lambda: r.lambda,
                bound: if r.k == 1 { 0.0 } else { bound },
                pass,
            }
        })
        .collect();
    let positive_modes = results.iter().filter(|r| r.lambda > 0.0).map(|r| r.k).collect();
    let all_pass = entries.iter().all(|e| e.pass);
    BoundReport {
        gamma,
        c,
        half_alpha_star: bound,
        entries,
        positive_modes,
        all_pass,
    }
}

/// Mode constants re-exported for callers assembling their own operators.
pub fn lambda_k(n: usize, k: usize) -> Result<f64> {
    Ok(mode_constants(n, k)?.lambda_k)
}

/// Max-norm of a vector; used for normalizing eigenvectors.
pub fn max_norm(v: &[f64]) -> f64 {
    norm_inf(v)
}
