//! The `c = 0` linearized spectrum around the stationary state, computed in
//! the unit frame (`R_s = 1`).
//!
//! For every spherical-harmonic degree `k` the bulk response is carried by
//! `ubar_k`, the regular solution of `u'' + (a_k / r) u' = f'(sigma_s) u`,
//! `u(0) = 1`. From it
//!
//! ```text
//! B_k     = g(sigma_bar) - sigma_s'(1) / ubar_k(1) * int_0^1 g'(sigma_s) ubar_k r^{a_k} dr
//! gamma_k = (n - 1) / ((lambda_k - n + 1) k) * B_k          (k >= 2)
//! alpha_k = -((lambda_k - n + 1) k / (n - 1)) (gamma - gamma_k)
//! alpha_0 = B_0
//! ```

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::TumorModel;
use crate::quad;
use crate::radial::{RadialFunction, RadialIvp};
use crate::stationary::{Frame, StationaryState};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ModeConstants {
    pub k: usize,
    pub lambda_k: f64,
    pub a_k: f64,
    pub d_k: u128,
}

fn binomial(n: u128, k: u128) -> Option<u128> {
    let k = k.min(n.saturating_sub(k));
    let mut acc: u128 = 1;
    for i in 0..k {
        // acc * (n - i) / (i + 1) stays integral at every step
        acc = acc.checked_mul(n - i)? / (i + 1);
    }
    Some(acc)
}

/// `lambda_k = k^2 + (n-2) k`, `a_k = 2k + n - 1` and the dimension `d_k`
/// of degree-`k` spherical harmonics on `S^{n-1}`.
pub fn mode_constants(n: usize, k: usize) -> Result<ModeConstants> {
    if n < 2 {
        return Err(Error::invalid(format!("dimension n = {n} must be at least 2")));
    }
    if k > 1_000_000 {
        return Err(Error::invalid(format!("mode k = {k} exceeds 10^6")));
    }
    let (nn, kk) = (n as u128, k as u128);
    let d_k = match k {
        0 => 1,
        1 => nn,
        _ => {
            let overflow = || Error::invalid(format!("d_k overflows for n = {n}, k = {k}"));
            let a = binomial(nn + kk - 1, kk).ok_or_else(overflow)?;
            let b = binomial(nn + kk - 3, kk - 2).ok_or_else(overflow)?;
            a - b
        }
    };
    let lambda = kk * kk + (nn - 2) * kk;
    Ok(ModeConstants {
        k,
        lambda_k: lambda as f64,
        a_k: (2 * k + n - 1) as f64,
        d_k,
    })
}

fn require_unit(state: &StationaryState) -> Result<()> {
    if state.frame != Frame::Unit {
        return Err(Error::invalid("spectral quantities are computed in the unit frame; rescale first"));
    }
    Ok(())
}

fn grid_step(state: &StationaryState) -> Result<(usize, f64)> {
    let h = state
        .sigma_s
        .uniform_spacing()
        .ok_or_else(|| Error::invalid("stationary profile must be sampled on a uniform grid"))?;
    Ok((state.sigma_s.len() - 1, h))
}

/// Regular solution `ubar_k` on the stationary grid.
pub fn solve_ubar(model: &TumorModel, state: &StationaryState, k: usize) -> Result<RadialFunction> {
    require_unit(state)?;
    let mc = mode_constants(model.n, k)?;
    let (steps, h) = grid_step(state)?;
    let sig = &state.sigma_s;
    let mut ivp = RadialIvp::new(mc.a_k, 1.0, |r: f64, u: f64| Ok(model.df_at(sig.eval(r))? * u));
    let sol = ivp.integrate(h, steps, None)?;
    let mut nodes = sol.r;
    nodes[steps] = state.sigma_s.r_end();
    let rf = RadialFunction::new(nodes, sol.y, Some(sol.dy))?;
    if let Some(i) = rf.values().iter().position(|&v| !(v > 0.0)) {
        return Err(Error::numerical(format!(
            "ubar_{k} is not positive at r = {}",
            rf.nodes()[i]
        )));
    }
    Ok(rf)
}

/// `ubar_k(1)` and the bracket `B_k`.
pub fn mode_bracket(model: &TumorModel, state: &StationaryState, k: usize) -> Result<(f64, f64)> {
    let ubar = solve_ubar(model, state, k)?;
    let mc = mode_constants(model.n, k)?;
    let (_, h) = grid_step(state)?;
    let ys = state
        .sigma_s
        .nodes()
        .iter()
        .zip(state.sigma_s.values())
        .zip(ubar.values())
        .map(|((&r, &s), &u)| Ok(model.dg_at(s)? * u * r.powf(mc.a_k)))
        .collect::<Result<Vec<f64>>>()?;
    let integral = quad::simpson(&ys, h)?;
    let u1 = ubar.last_value();
    let b = model.g_at(model.sigma_bar)? - state.sigma_prime_boundary / u1 * integral;
    Ok((u1, b))
}

fn gamma_from_bracket(n: usize, k: usize, b: f64) -> Result<f64> {
    let mc = mode_constants(n, k)?;
    Ok((n as f64 - 1.0) / ((mc.lambda_k - n as f64 + 1.0) * k as f64) * b)
}

/// Bifurcation value `gamma_k`, `k >= 2`.
pub fn gamma_k(model: &TumorModel, state: &StationaryState, k: usize) -> Result<f64> {
    if k < 2 {
        return Err(Error::invalid(format!("gamma_k is defined for k >= 2, got k = {k}")));
    }
    let (_, b) = mode_bracket(model, state, k)?;
    gamma_from_bracket(model.n, k, b)
}

/// `alpha_{k,gamma}` from a stored `gamma_k`; `k = 1` gives the neutral
/// value 0.
pub fn alpha_k(gamma_k: f64, n: usize, k: usize, gamma: f64) -> Result<f64> {
    match k {
        0 => Err(Error::invalid("alpha for k = 0 is computed by alpha_0")),
        1 => Ok(0.0),
        _ => {
            let mc = mode_constants(n, k)?;
            Ok(-((mc.lambda_k - n as f64 + 1.0) * k as f64 / (n as f64 - 1.0)) * (gamma - gamma_k))
        }
    }
}

/// `alpha_{0,gamma}`, independent of `gamma`.
pub fn alpha_0(model: &TumorModel, state: &StationaryState) -> Result<f64> {
    Ok(mode_bracket(model, state, 0)?.1)
}

/// `gamma_k` for `k = 2..=k_max`, evaluated in parallel.
pub fn gamma_table(model: &TumorModel, state: &StationaryState, k_max: usize) -> Result<Vec<f64>> {
    (2..=k_max)
        .into_par_iter()
        .map(|k| gamma_k(model, state, k))
        .collect()
}

fn max_with_arg(gammas: &[f64]) -> (f64, usize) {
    let mut best = (f64::NEG_INFINITY, 2);
    for (i, &g) in gammas.iter().enumerate() {
        if g > best.0 {
            best = (g, i + 2);
        }
    }
    best
}

fn check_tail(gammas: &[f64], gamma_star: f64, k_max: usize, strict: bool) -> Result<()> {
    let last = *gammas.last().unwrap();
    if !(last < 0.5 * gamma_star) {
        let msg = format!("gamma_k tail has not decayed: gamma_{k_max} = {last:e}, gamma_star = {gamma_star:e}");
        if strict {
            return Err(Error::numerical(msg));
        }
        log::warn!("{msg}");
    }
    Ok(())
}

/// `gamma_star = max_{2 <= k <= k_max} gamma_k` and its argmax.
pub fn gamma_star(model: &TumorModel, state: &StationaryState, k_max: usize, strict: bool) -> Result<(f64, usize)> {
    if k_max < 8 {
        return Err(Error::invalid(format!("k_max = {k_max} must be at least 8")));
    }
    let gammas = gamma_table(model, state, k_max)?;
    let (gs, arg) = max_with_arg(&gammas);
    check_tail(&gammas, gs, k_max, strict)?;
    Ok((gs, arg))
}

fn shoot_nodal_count(model: &TumorModel, state: &StationaryState, nu: f64) -> Result<usize> {
    let (steps, h) = grid_step(state)?;
    let sig = &state.sigma_s;
    let mut ivp = RadialIvp::new(model.n as f64 - 1.0, 1.0, |r: f64, u: f64| {
        Ok((model.df_at(sig.eval(r))? + nu) * u)
    });
    let sol = ivp.integrate(h, steps, None)?;
    Ok(sol.y.windows(2).filter(|w| (w[0] > 0.0) != (w[1] > 0.0)).count())
}

/// Largest Dirichlet eigenvalue of `Delta - f'(sigma_s)` on the unit ball,
/// restricted to radial functions, by shooting with nodal counting.
pub fn nu1(model: &TumorModel, state: &StationaryState) -> Result<f64> {
    require_unit(state)?;
    let mut hi = 0.0;
    if shoot_nodal_count(model, state, hi)? != 0 {
        return Err(Error::numerical("radial Dirichlet problem has a non-negative eigenvalue"));
    }
    let mut lo = -1.0;
    let mut tries = 0;
    while shoot_nodal_count(model, state, lo)? == 0 {
        hi = lo;
        lo *= 2.0;
        tries += 1;
        if tries > 60 {
            return Err(Error::numerical("could not bracket the first Dirichlet eigenvalue"));
        }
    }
    while hi - lo > 1e-13 * lo.abs().max(1.0) {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if shoot_nodal_count(model, state, mid)? == 0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let nu = 0.5 * (lo + hi);
    if !(nu < 0.0) {
        return Err(Error::numerical(format!("nu_1 = {nu} is not negative")));
    }
    Ok(nu)
}

/// `c_0 = nu_1 / alpha_star`; only meaningful above the threshold.
pub fn c0_bound(nu1: f64, alpha_star: f64) -> Result<f64> {
    if !(nu1 < 0.0) {
        return Err(Error::invalid(format!("nu_1 = {nu1} must be negative")));
    }
    if !(alpha_star < 0.0) {
        return Err(Error::invalid(format!(
            "alpha_star = {alpha_star} is not negative (gamma is not above gamma_star)"
        )));
    }
    Ok(nu1 / alpha_star)
}

#[derive(Debug, Clone, Serialize)]
pub struct SpectralRow {
    pub k: usize,
    pub lambda_k: f64,
    pub a_k: f64,
    pub d_k: u128,
    pub ubar_1: f64,
    /// `None` for `k < 2`.
    pub gamma_k: Option<f64>,
    pub alpha_k: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SpectralReport {
    pub n: usize,
    pub gamma: f64,
    pub rows: Vec<SpectralRow>,
    pub alpha_0: f64,
    pub gamma_star: f64,
    pub argmax_k: usize,
    pub alpha_star: f64,
    pub nu1: f64,
    /// `None` when `gamma <= gamma_star`.
    pub c0: Option<f64>,
    pub k_max: usize,
}

impl SpectralReport {
    /// Same report at a different surface tension; only `alpha` values and
    /// `c_0` change.
    pub fn at_gamma(&self, gamma: f64) -> SpectralReport {
        let mut rep = self.clone();
        rep.gamma = gamma;
        for row in rep.rows.iter_mut() {
            if let Some(gk) = row.gamma_k {
                row.alpha_k = alpha_k(gk, self.n, row.k, gamma).expect("k >= 2");
            }
        }
        rep.alpha_star = rep
            .rows
            .iter()
            .filter(|r| r.k >= 2)
            .map(|r| r.alpha_k)
            .fold(f64::NEG_INFINITY, f64::max);
        rep.c0 = c0_bound(rep.nu1, rep.alpha_star).ok();
        rep
    }

    pub fn row(&self, k: usize) -> Option<&SpectralRow> {
        self.rows.get(k)
    }

    /// `alpha_{k,gamma}` including the `k = 0` and `k = 1` conventions.
    pub fn alpha(&self, k: usize) -> Option<f64> {
        self.rows.get(k).map(|r| r.alpha_k)
    }

    /// Modes `k >= 2` with positive `alpha_{k,gamma}`.
    pub fn unstable_modes(&self) -> Vec<usize> {
        self.rows.iter().filter(|r| r.k >= 2 && r.alpha_k > 0.0).map(|r| r.k).collect()
    }

    pub fn is_stable(&self) -> bool {
        self.gamma > self.gamma_star
    }
}

/// Full `c = 0` report for `k = 0..=k_max` at surface tension `gamma`
/// (unit frame).
pub fn spectral_report(
    model: &TumorModel,
    state: &StationaryState,
    k_max: usize,
    gamma: f64,
    strict: bool,
) -> Result<SpectralReport> {
    require_unit(state)?;
    if k_max < 8 {
        return Err(Error::invalid(format!("k_max = {k_max} must be at least 8")));
    }
    let brackets: Vec<(f64, f64)> = (0..=k_max)
        .into_par_iter()
        .map(|k| mode_bracket(model, state, k))
        .collect::<Result<_>>()?;
    let n = model.n;
    let mut rows = Vec::with_capacity(k_max + 1);
    for (k, &(u1, b)) in brackets.iter().enumerate() {
        let mc = mode_constants(n, k)?;
        let (gk, ak) = match k {
            0 => (None, b),
            1 => (None, 0.0),
            _ => {
                let gk = gamma_from_bracket(n, k, b)?;
                (Some(gk), alpha_k(gk, n, k, gamma)?)
            }
        };
        rows.push(SpectralRow {
            k,
            lambda_k: mc.lambda_k,
            a_k: mc.a_k,
            d_k: mc.d_k,
            ubar_1: u1,
            gamma_k: gk,
            alpha_k: ak,
        });
    }
    let gammas: Vec<f64> = rows.iter().filter_map(|r| r.gamma_k).collect();
    let (gs, arg) = max_with_arg(&gammas);
    check_tail(&gammas, gs, k_max, strict)?;
    let alpha_star = rows
        .iter()
        .filter(|r| r.k >= 2)
        .map(|r| r.alpha_k)
        .fold(f64::NEG_INFINITY, f64::max);
    let nu = nu1(model, state)?;
    Ok(SpectralReport {
        n,
        gamma,
        alpha_0: rows[0].alpha_k,
        rows,
        gamma_star: gs,
        argmax_k: arg,
        alpha_star,
        nu1: nu,
        c0: c0_bound(nu, alpha_star).ok(),
        k_max,
    })
}
