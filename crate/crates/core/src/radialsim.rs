//! Radially symmetric moving-boundary dynamics
//!
//! ```text
//! c sigma_t = Delta sigma - f(sigma)  in |x| < R(t),   sigma(R) = sigma_bar,
//! R' = R^{1-n} int_0^R g(sigma) r^{n-1} dr,
//! ```
//!
//! on the fixed coordinate `s = r / R`. The diffusion and the reaction are
//! advanced implicitly (reaction linearized about the old value), the
//! advection `(s R'/R) sigma_s` and the radius explicitly. For `c = 0` the
//! elliptic problem is solved by damped Newton at every step.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::Tridiagonal;
use crate::model::TumorModel;
use crate::quad;
use crate::radial::RadialFunction;
use crate::stationary::StationaryState;

pub const DEFAULT_DT: f64 = 0.01;
pub const NEWTON_TOL: f64 = 1e-11;
const NEWTON_MAX_ITER: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RadialMode {
    Parabolic,
    QuasiStatic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Reaction {
    /// `f(s_old) + f'(s_old) (s_new - s_old)`.
    LinearlyImplicit,
    /// `f(s_old)`; requires `dt <= 2 c / max f'`.
    Explicit,
}

#[derive(Debug, Clone)]
pub struct RadialSimState {
    pub t: f64,
    pub r: f64,
    /// Nodal values on the uniform grid of `s in [0, 1]`.
    pub sigma: Vec<f64>,
    pub mode: RadialMode,
}

impl RadialSimState {
    pub fn intervals(&self) -> usize {
        self.sigma.len() - 1
    }

    pub fn profile(&self) -> RadialFunction {
        RadialFunction::uniform(1.0, self.sigma.clone(), None).expect("uniform grid")
    }
}

fn grid_laplacian(n: usize, intervals: usize) -> Tridiagonal {
    let h = 1.0 / intervals as f64;
    let ih2 = 1.0 / (h * h);
    let nm1 = n as f64 - 1.0;
    let mut t = Tridiagonal::zeros(intervals);
    t.diag[0] = -2.0 * n as f64 * ih2;
    t.upper[0] = 2.0 * n as f64 * ih2;
    for j in 1..intervals {
        let s = j as f64 * h;
        t.lower[j] = ih2 - nm1 / (2.0 * s * h);
        t.diag[j] = -2.0 * ih2;
        t.upper[j] = ih2 + nm1 / (2.0 * s * h);
    }
    t
}

/// `R' = R int_0^1 g(sigma(s)) s^{n-1} ds` by Simpson's rule.
pub fn boundary_speed(model: &TumorModel, state: &RadialSimState) -> Result<f64> {
    let m = state.intervals();
    let h = 1.0 / m as f64;
    let ys = state
        .sigma
        .iter()
        .enumerate()
        .map(|(j, &s)| Ok(model.g_at(s)? * (j as f64 * h).powi(model.n as i32 - 1)))
        .collect::<Result<Vec<f64>>>()?;
    Ok(state.r * quad::simpson(&ys, h)?)
}

/// Solve `sigma'' + (n-1)/s sigma' = R^2 f(sigma)`, `sigma'(0) = 0`,
/// `sigma(1) = sigma_bar` by Newton with step halving.
pub fn quasi_static_profile(model: &TumorModel, r: f64, intervals: usize, guess: Option<&[f64]>) -> Result<Vec<f64>> {
    let lap = grid_laplacian(model.n, intervals);
    let r2 = r * r;
    let bar = model.sigma_bar;
    let mut s: Vec<f64> = match guess {
        Some(g) if g.len() == intervals + 1 => g[..intervals].to_vec(),
        _ => vec![bar; intervals],
    };
    let residual = |s: &[f64]| -> Result<Vec<f64>> {
        let mut res = lap.matvec(s);
        res[intervals - 1] += lap.upper[intervals - 1] * bar;
        for (ri, &si) in res.iter_mut().zip(s) {
            *ri -= r2 * model.f_at(si)?;
        }
        Ok(res)
    };
    let norm = |v: &[f64]| v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let mut res = residual(&s)?;
    for _ in 0..NEWTON_MAX_ITER {
        let mut jac = lap.clone();
        for (d, &si) in jac.diag.iter_mut().zip(&s) {
            *d -= r2 * model.df_at(si)?;
        }
        let delta = jac.solve(&res)?;
        let step = norm(&delta);
        let base = norm(&res);
        let mut lambda = 1.0;
        loop {
            let trial: Vec<f64> = s.iter().zip(&delta).map(|(a, d)| a - lambda * d).collect();
            let tr = residual(&trial);
            if let Ok(tr) = tr {
                if norm(&tr) <= (1.0 - 1e-4 * lambda) * base || lambda * step < NEWTON_TOL || base == 0.0 {
                    s = trial;
                    res = tr;
                    break;
                }
            }
            lambda *= 0.5;
            if lambda < 1e-10 {
                return Err(Error::NoConvergence {
                    what: "quasi-static Newton line search",
                    iterations: 0,
                    residual: base,
                });
            }
        }
        if lambda * step < NEWTON_TOL {
            s.push(bar);
            return Ok(s);
        }
    }
    Err(Error::NoConvergence {
        what: "quasi-static Newton",
        iterations: NEWTON_MAX_ITER,
        residual: norm(&res),
    })
}

/// Time stepper holding the factor-independent pieces.
#[derive(Debug, Clone)]
pub struct RadialStepper<'a> {
    model: &'a TumorModel,
    lap: Tridiagonal,
    pub reaction: Reaction,
}

impl<'a> RadialStepper<'a> {
    pub fn new(model: &'a TumorModel, intervals: usize) -> Self {
        RadialStepper {
            model,
            lap: grid_laplacian(model.n, intervals),
            reaction: Reaction::LinearlyImplicit,
        }
    }

    pub fn step(&self, state: &RadialSimState, dt: f64) -> Result<RadialSimState> {
        if !(dt > 0.0) {
            return Err(Error::invalid("dt must be positive"));
        }
        let model = self.model;
        let m = state.intervals();
        let rdot = boundary_speed(model, state)?;
        let sigma = match state.mode {
            RadialMode::QuasiStatic => quasi_static_profile(model, state.r, m, Some(&state.sigma))?,
            RadialMode::Parabolic => {
                let c = model.c;
                let tau = dt / c;
                let h = 1.0 / m as f64;
                let adv = dt * rdot / state.r;
                let scale = tau / (state.r * state.r);
                let mut mat = self.lap.scaled_shifted(-scale, 1.0);
                let mut rhs = Vec::with_capacity(m);
                for j in 0..m {
                    let s = state.sigma[j];
                    let f = model.f_at(s)?;
                    let mut b = s;
                    match self.reaction {
                        Reaction::LinearlyImplicit => {
                            let fp = model.df_at(s)?;
                            mat.diag[j] += tau * fp;
                            b -= tau * (f - fp * s);
                        }
                        Reaction::Explicit => {
                            let fp = model.df_at(s)?;
                            if fp > 0.0 && dt > 2.0 * c / fp {
                                return Err(Error::invalid(format!(
                                    "explicit reaction needs dt <= {:.3e}",
                                    2.0 * c / fp
                                )));
                            }
                            b -= tau * f;
                        }
                    }
                    if j > 0 {
                        let sj = j as f64 * h;
                        b += adv * sj * (state.sigma[j + 1] - state.sigma[j - 1]) / (2.0 * h);
                    }
                    rhs.push(b);
                }
                rhs[m - 1] += scale * self.lap.upper[m - 1] * model.sigma_bar;
                let mut s = mat.solve(&rhs)?;
                s.push(model.sigma_bar);
                s
            }
        };
        let bar = model.sigma_bar;
        let slack = 1e-9 * bar.abs().max(1.0);
        if let Some(bad) = sigma.iter().find(|&&v| !(v > -slack && v <= bar + slack)) {
            return Err(Error::numerical(format!("sigma left (0, sigma_bar]: {bad}")));
        }
        let r = state.r + dt * rdot;
        if !(r > 0.0) {
            return Err(Error::numerical("radius collapsed"));
        }
        Ok(RadialSimState {
            t: state.t + dt,
            r,
            sigma,
            mode: state.mode,
        })
    }
}

pub fn step_radial(model: &TumorModel, state: &RadialSimState, dt: f64) -> Result<RadialSimState> {
    RadialStepper::new(model, state.intervals()).step(state, dt)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RadialOutcome {
    Finished,
    Diverged,
}

#[derive(Debug, Clone, Serialize)]
pub struct RadialTrajectory {
    pub t: Vec<f64>,
    pub r: Vec<f64>,
    pub sigma_err: Vec<f64>,
    /// `|R'|` at the sampled times.
    pub speed: Vec<f64>,
    pub outcome: RadialOutcome,
    #[serde(skip)]
    pub final_state: Option<RadialSimState>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RadialSummary {
    pub final_r: f64,
    pub rate: f64,
    pub converged: bool,
}

#[derive(Debug, Clone)]
pub struct RadialOptions {
    pub intervals: usize,
    pub dt: f64,
    pub t_end: f64,
    pub stride: usize,
    pub reaction: Reaction,
}

impl Default for RadialOptions {
    fn default() -> Self {
        RadialOptions {
            intervals: 2048,
            dt: DEFAULT_DT,
            t_end: 300.0,
            stride: 10,
            reaction: Reaction::LinearlyImplicit,
        }
    }
}

/// Initial state at radius `r0`. Without `sigma0` the profile is the
/// quasi-static one for `r0`.
pub fn initial_state(model: &TumorModel, r0: f64, sigma0: Option<&RadialFunction>, intervals: usize) -> Result<RadialSimState> {
    if !(r0 > 0.0) {
        return Err(Error::invalid(format!("R0 = {r0} must be positive")));
    }
    let sigma = match sigma0 {
        Some(f) => {
            let h = 1.0 / intervals as f64;
            let mut v: Vec<f64> = (0..=intervals).map(|j| f.eval(j as f64 * h)).collect();
            let end = v[intervals];
            if (end - model.sigma_bar).abs() > 1e-8 * model.sigma_bar.abs().max(1.0) {
                return Err(Error::invalid(format!("sigma0(1) = {end} differs from sigma_bar")));
            }
            v[intervals] = model.sigma_bar;
            v
        }
        None => quasi_static_profile(model, r0, intervals, None)?,
    };
    Ok(RadialSimState {
        t: 0.0,
        r: r0,
        sigma,
        mode: if model.c > 0.0 { RadialMode::Parabolic } else { RadialMode::QuasiStatic },
    })
}

fn sigma_error(stationary: &StationaryState, state: &RadialSimState) -> f64 {
    let m = state.intervals();
    let rs = stationary.r_s;
    state
        .sigma
        .iter()
        .enumerate()
        .map(|(j, &v)| (v - stationary.sigma_s.eval(rs * j as f64 / m as f64)).abs())
        .fold(0.0, f64::max)
}

/// Integrate to `t_end`, sampling `(t, R, |sigma - sigma_s(R_s s)|_inf)`
/// every `stride` steps. `gamma` does not enter radial dynamics and is
/// only checked for positivity.
pub fn run_radial(
    model: &TumorModel,
    stationary: &StationaryState,
    gamma: f64,
    r0: f64,
    sigma0: Option<&RadialFunction>,
    opts: &RadialOptions,
) -> Result<RadialTrajectory> {
    if !(gamma > 0.0) {
        return Err(Error::invalid("gamma must be positive"));
    }
    if !(opts.dt > 0.0 && opts.t_end >= 0.0) {
        return Err(Error::invalid("dt must be positive and t_end non-negative"));
    }
    let mut stepper = RadialStepper::new(model, opts.intervals);
    stepper.reaction = opts.reaction;
    let mut state = initial_state(model, r0, sigma0, opts.intervals)?;
    let steps = (opts.t_end / opts.dt).round() as usize;
    let stride = opts.stride.max(1);
    let mut traj = RadialTrajectory {
        t: vec![0.0],
        r: vec![state.r],
        sigma_err: vec![sigma_error(stationary, &state)],
        speed: vec![boundary_speed(model, &state)?.abs()],
        outcome: RadialOutcome::Finished,
        final_state: None,
    };
    let rs = stationary.r_s;
    for step in 1..=steps {
        state = stepper.step(&state, opts.dt)?;
        let diverged = state.r > 10.0 * rs || state.r < 0.1 * rs;
        if step % stride == 0 || step == steps || diverged {
            traj.t.push(step as f64 * opts.dt);
            traj.r.push(state.r);
            traj.sigma_err.push(sigma_error(stationary, &state));
            traj.speed.push(boundary_speed(model, &state)?.abs());
        }
        if diverged {
            log::warn!("radial run diverged at t = {:.3}, R = {:.4}", state.t, state.r);
            traj.outcome = RadialOutcome::Diverged;
            break;
        }
    }
    traj.final_state = Some(state);
    Ok(traj)
}

impl RadialTrajectory {
    /// Final radius, rate from the tail of `|R'|`, and convergence flag
    /// `|R - R_s| < tol`.
    pub fn summary(&self, r_s: f64, window: f64, tol: f64) -> RadialSummary {
        let final_r = *self.r.last().unwrap();
        let rate = measure_rate(&self.t, &self.speed, window).unwrap_or(f64::NAN);
        RadialSummary {
            final_r,
            rate,
            converged: self.outcome == RadialOutcome::Finished && (final_r - r_s).abs() < tol,
        }
    }
}

/// Decay rate `-d log(value)/dt` by least squares over the final `window`
/// fraction of the time span. Growth gives a negative rate.
pub fn measure_rate(t: &[f64], values: &[f64], window: f64) -> Result<f64> {
    if t.len() != values.len() {
        return Err(Error::invalid("time and value series differ in length"));
    }
    if !(window > 0.0 && window <= 1.0) {
        return Err(Error::invalid(format!("window = {window} must lie in (0, 1]")));
    }
    if t.len() < 2 {
        return Err(Error::invalid("need at least two samples"));
    }
    let t_end = *t.last().unwrap();
    let t_start = t_end - window * (t_end - t[0]);
    let pts: Vec<(f64, f64)> = t
        .iter()
        .zip(values)
        .filter(|(&ti, _)| ti >= t_start - 1e-12 * t_end.abs().max(1.0))
        .map(|(&ti, &v)| (ti, v))
        .collect();
    if pts.len() < 2 {
        return Err(Error::invalid("fewer than two samples in the rate window"));
    }
    if let Some((_, v)) = pts.iter().find(|(_, v)| !(*v > 0.0)) {
        return Err(Error::invalid(format!("non-positive value {v} in the rate window")));
    }
    let n = pts.len() as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1.ln()).sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for &(ti, v) in &pts {
        sxy += (ti - mt) * (v.ln() - my);
        sxx += (ti - mt) * (ti - mt);
    }
    Ok(-sxy / sxx)
}
