//! Radially symmetric stationary solution by shooting on the center value
//! `sigma_c`, with the mass balance as shooting residual.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::TumorModel;
use crate::quad;
use crate::radial::{RadialFunction, RadialIvp};

/// Default number of RK4 steps across the stationary radius.
pub const DEFAULT_STEPS: usize = 4096;
const MAX_BISECTIONS: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Frame {
    Physical,
    Unit,
}

#[derive(Debug, Clone)]
pub struct StationaryState {
    pub sigma_s: RadialFunction,
    pub p_s: RadialFunction,
    pub r_s: f64,
    pub sigma_center: f64,
    pub sigma_prime_boundary: f64,
    pub frame: Frame,
    pub mass_balance_residual: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct StationarySummary {
    #[serde(rename = "R_s")]
    pub r_s: f64,
    pub sigma_center: f64,
    pub sigma_prime_boundary: f64,
    pub mass_balance_residual: f64,
}

impl StationaryState {
    pub fn summary(&self) -> StationarySummary {
        StationarySummary {
            r_s: self.r_s,
            sigma_center: self.sigma_center,
            sigma_prime_boundary: self.sigma_prime_boundary,
            mass_balance_residual: self.mass_balance_residual,
        }
    }

    /// `sigma_s` resampled on a uniform grid of `[0, R_s]`.
    pub fn sigma_on_grid(&self, intervals: usize) -> Vec<f64> {
        self.sigma_s.resample(intervals).values().to_vec()
    }
}

fn rhs(model: &TumorModel) -> impl FnMut(f64, f64) -> Result<f64> + '_ {
    move |_r, s| model.f_at(s)
}

fn check_center(model: &TumorModel, sigma_c: f64) -> Result<()> {
    if !(sigma_c > 0.0 && sigma_c.is_finite()) {
        return Err(Error::invalid(format!("center value {sigma_c} must be positive")));
    }
    if model.f_at(sigma_c)? <= 0.0 {
        return Err(Error::numerical(format!(
            "f({sigma_c}) is not positive; the profile cannot increase (check (A1))"
        )));
    }
    Ok(())
}

fn check_monotone(sol: &RadialFunction) -> Result<()> {
    let d = sol.derivs().expect("IVP solutions carry derivatives");
    if let Some(i) = d.iter().skip(1).position(|&v| !(v > 0.0)) {
        return Err(Error::numerical(format!(
            "profile is not increasing at r = {} (check (A1) or the step size)",
            sol.nodes()[i + 1]
        )));
    }
    Ok(())
}

/// Integrate `sigma'' + (n-1)/r sigma' = f(sigma)` from `sigma(0) = sigma_c`
/// with step `r_max / 4096` until `sigma` reaches `sigma_bar` or `r_max`.
///
/// Returns the profile up to the hit (inclusive) and the hit radius, or
/// `None` when `sigma_bar` is not reached before `r_max`.
pub fn integrate_sigma(model: &TumorModel, sigma_c: f64, r_max: f64) -> Result<(RadialFunction, Option<f64>)> {
    integrate_sigma_steps(model, sigma_c, r_max / DEFAULT_STEPS as f64, DEFAULT_STEPS)
}

/// As [`integrate_sigma`] with explicit step and step budget.
pub fn integrate_sigma_steps(
    model: &TumorModel,
    sigma_c: f64,
    h: f64,
    steps: usize,
) -> Result<(RadialFunction, Option<f64>)> {
    check_center(model, sigma_c)?;
    let mut ivp = RadialIvp::new(model.n as f64 - 1.0, sigma_c, rhs(model));
    let sol = ivp.integrate(h, steps, Some(model.sigma_bar))?;
    let hit = sol.hit;
    if hit == Some(0.0) {
        let rf = RadialFunction::new(vec![0.0, h], vec![sigma_c; 2], Some(vec![0.0; 2]))?;
        return Ok((rf, hit));
    }
    let rf = sol.into_radial()?;
    if rf.len() > 2 {
        check_monotone(&rf)?;
    }
    Ok((rf, hit))
}

/// Composite Simpson value of `int_0^R g(sigma(r)) r^{n-1} dr`.
///
/// Samples are used directly when `sigma` lives on a uniform grid ending at
/// `R`; otherwise the profile is first resampled uniformly on `[0, R]`.
pub fn mass_balance(model: &TumorModel, sigma: &RadialFunction, radius: f64) -> Result<f64> {
    let intervals = sigma.len() - 1;
    if intervals < 8 {
        return Err(Error::invalid(format!(
            "grid too coarse for the mass balance ({intervals} intervals, need 8)"
        )));
    }
    let direct = sigma.uniform_spacing().is_some() && (sigma.r_end() - radius).abs() <= 1e-14 * radius.max(1.0);
    let sampled;
    let prof = if direct {
        sigma
    } else {
        let m = intervals + intervals % 2;
        let nodes = crate::radial::uniform_nodes(radius, m);
        let values = nodes.iter().map(|&r| sigma.eval(r)).collect();
        sampled = RadialFunction::new(nodes, values, None)?;
        &sampled
    };
    let h = radius / (prof.len() - 1) as f64;
    let pow = model.n as i32 - 1;
    let ys = prof
        .nodes()
        .iter()
        .zip(prof.values())
        .map(|(&r, &s)| Ok(model.g_at(s)? * r.powi(pow)))
        .collect::<Result<Vec<f64>>>()?;
    quad::simpson(&ys, h)
}

fn length_scale(model: &TumorModel) -> Result<f64> {
    let d = model.df_at(model.sigma_bar)?;
    Ok((1.0 / d.max(1e-12).sqrt()).clamp(1e-3, 1e3))
}

/// Shooting residual for a trial center value: mass balance up to the hit
/// radius, or `None` when the profile never reaches `sigma_bar`.
fn trial(model: &TumorModel, sigma_c: f64, h: f64, steps: usize) -> Result<Option<(f64, f64)>> {
    let (prof, hit) = integrate_sigma_steps(model, sigma_c, h, 64 * steps)?;
    match hit {
        None => Ok(None),
        Some(r) if r <= 0.0 => Ok(Some((0.0, 0.0))),
        Some(r) => {
            let nodes = crate::radial::uniform_nodes(r, steps);
            let values = nodes.iter().map(|&x| prof.eval(x)).collect();
            let uniform = RadialFunction::new(nodes, values, None)?;
            Ok(Some((mass_balance(model, &uniform, r)?, r)))
        }
    }
}

fn bisect_center(model: &TumorModel, tol: f64, h: f64, steps: usize) -> Result<(f64, f64)> {
    let sb = model.sigma_bar;
    let (mut lo, mut hi) = (1e-6 * sb, sb * (1.0 - 1e-6));
    let sign = |t: Option<(f64, f64)>| match t {
        None => -1.0,
        Some((m, _)) => m.signum(),
    };
    let s_lo = sign(trial(model, lo, h, steps)?);
    let s_hi = sign(trial(model, hi, h, steps)?);
    if !(s_lo < 0.0 && s_hi > 0.0) {
        return Err(Error::numerical(format!(
            "mass balance does not change sign on ({lo:e}, {hi}); no stationary solution in the bracket"
        )));
    }
    let width_tol = (1e-2 * tol * sb).max(4.0 * f64::EPSILON * sb);
    let mut iterations = 0;
    while hi - lo > width_tol {
        if iterations == MAX_BISECTIONS {
            return Err(Error::NoConvergence {
                what: "stationary bisection",
                iterations,
                residual: hi - lo,
            });
        }
        iterations += 1;
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if sign(trial(model, mid, h, steps)?) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let sigma_c = 0.5 * (lo + hi);
    let Some((_, r_s)) = trial(model, sigma_c, h, steps)? else {
        return Err(Error::numerical("converged center value does not reach sigma_bar"));
    };
    log::debug!("stationary: sigma_c = {sigma_c}, R_s = {r_s} after {iterations} bisections");
    Ok((sigma_c, r_s))
}

/// Solve the stationary problem with the default step count.
pub fn solve_stationary(model: &TumorModel, tol: f64) -> Result<StationaryState> {
    solve_stationary_steps(model, tol, DEFAULT_STEPS)
}

/// Solve the stationary problem; the final profile uses `steps` uniform RK4
/// steps across `[0, R_s]`.
pub fn solve_stationary_steps(model: &TumorModel, tol: f64, steps: usize) -> Result<StationaryState> {
    if !(tol > 0.0) {
        return Err(Error::invalid("tolerance must be positive"));
    }
    if steps < 8 || !steps.is_multiple_of(2) {
        return Err(Error::invalid("step count must be even and at least 8"));
    }
    // The trial step is refined until it equals R_s / steps, so that the
    // final profile ends on the boundary with the same discretization.
    let mut h = length_scale(model)? / steps as f64;
    let mut prev = f64::NAN;
    let mut found = None;
    for _ in 0..6 {
        let (sigma_c, r_s) = bisect_center(model, tol, h, steps)?;
        found = Some((sigma_c, r_s));
        if (r_s - prev).abs() <= 1e-3 * tol * r_s {
            break;
        }
        prev = r_s;
        h = r_s / steps as f64;
    }
    let (sigma_c, r_s) = found.expect("at least one round");
    finish_state(model, sigma_c, r_s, steps, tol)
}

fn finish_state(model: &TumorModel, sigma_c: f64, r_s: f64, steps: usize, tol: f64) -> Result<StationaryState> {
    let h = r_s / steps as f64;
    let mut ivp = RadialIvp::new(model.n as f64 - 1.0, sigma_c, rhs(model));
    let sol = ivp.integrate(h, steps, None)?;
    let mut r = sol.r;
    r[steps] = r_s;
    let sigma_s = RadialFunction::new(r, sol.y, Some(sol.dy))?;
    check_monotone(&sigma_s)?;
    let boundary_err = (sigma_s.last_value() - model.sigma_bar).abs();
    if boundary_err > tol.max(1e-12) * model.sigma_bar.max(1.0) {
        return Err(Error::NoConvergence {
            what: "stationary boundary condition",
            iterations: 1,
            residual: boundary_err,
        });
    }
    let sigma_prime_boundary = *sigma_s.derivs().unwrap().last().unwrap();
    let mass = mass_balance(model, &sigma_s, r_s)?;
    let mut state = StationaryState {
        sigma_s,
        p_s: RadialFunction::uniform(r_s, vec![0.0; 2], None)?,
        r_s,
        sigma_center: sigma_c,
        sigma_prime_boundary,
        frame: Frame::Physical,
        mass_balance_residual: mass,
    };
    state.p_s = pressure_profile(&state, model)?;
    Ok(state)
}

/// Pressure with `p'(r) = -r^{1-n} int_0^r g(sigma_s) s^{n-1} ds` and
/// `p(R_s) = gamma / R_s`.
pub fn pressure_profile(state: &StationaryState, model: &TumorModel) -> Result<RadialFunction> {
    let prof = match state.sigma_s.uniform_spacing() {
        Some(_) => state.sigma_s.clone(),
        None => state.sigma_s.resample(DEFAULT_STEPS),
    };
    let intervals = prof.len() - 1;
    let h = state.r_s / intervals as f64;
    let pow = model.n as i32 - 1;
    let ys = prof
        .nodes()
        .iter()
        .zip(prof.values())
        .map(|(&r, &s)| Ok(model.g_at(s)? * r.powi(pow)))
        .collect::<Result<Vec<f64>>>()?;
    let inner = quad::cumulative(&ys, h);
    let dp: Vec<f64> = prof
        .nodes()
        .iter()
        .zip(&inner)
        .map(|(&r, &c)| if r == 0.0 { 0.0 } else { -c / r.powi(pow) })
        .collect();
    let pint = quad::cumulative(&dp, h);
    let total = pint[intervals];
    let boundary = model.gamma / state.r_s;
    let p: Vec<f64> = pint.iter().map(|&v| boundary - (total - v)).collect();
    RadialFunction::new(prof.nodes().to_vec(), p, Some(dp))
}

/// Express a physical-frame state in the coordinate `r / R_s`. The returned
/// model has `f` and `g` multiplied by `R_s^2` and surface tension
/// `gamma / R_s`.
pub fn rescale_to_unit(state: &StationaryState, model: &TumorModel) -> (StationaryState, TumorModel) {
    if state.frame == Frame::Unit {
        return (state.clone(), model.clone());
    }
    let r = state.r_s;
    let unit_model = model.rescaled(r);
    let scale_mass = r.powi(2 - model.n as i32);
    let unit = StationaryState {
        sigma_s: state.sigma_s.rescaled(r),
        p_s: state.p_s.rescaled(r),
        r_s: 1.0,
        sigma_center: state.sigma_center,
        sigma_prime_boundary: state.sigma_prime_boundary * r,
        frame: Frame::Unit,
        mass_balance_residual: state.mass_balance_residual * scale_mass,
    };
    (unit, unit_model)
}

/// Solve and rescale in one go.
pub fn solve_unit(model: &TumorModel, tol: f64, steps: usize) -> Result<(StationaryState, TumorModel, StationaryState)> {
    let phys = solve_stationary_steps(model, tol, steps)?;
    let (unit, unit_model) = rescale_to_unit(&phys, model);
    Ok((unit, unit_model, phys))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::reference_model;

    #[test]
    fn reference_radius() {
        let m = reference_model(0.0, 1.0);
        let s = solve_stationary(&m, 1e-10).unwrap();
        assert!((s.r_s - 1.0).abs() < 1e-8, "{}", s.r_s);
        assert!((s.sigma_center - 1.0 / 1f64.sinh()).abs() < 1e-8);
        assert!((s.sigma_prime_boundary - (1.0 / 1f64.tanh() - 1.0)).abs() < 1e-7);
    }

    #[test]
    fn degenerate_center() {
        let m = reference_model(0.0, 1.0);
        let (_, hit) = integrate_sigma(&m, 1.0, 2.0).unwrap();
        assert_eq!(hit, Some(0.0));
    }

    #[test]
    fn non_positive_center_rejected() {
        let m = reference_model(0.0, 1.0);
        assert!(integrate_sigma(&m, 0.0, 2.0).is_err());
    }
}
