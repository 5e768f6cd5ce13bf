//! Linearized dynamics restricted to one spherical-harmonic degree `k`:
//!
//! ```text
//! d/dt v   = c^{-1} L_k^f v + s1 w_k (J_k v + alpha eta)
//! d/dt eta = J_k v + alpha eta
//! ```
//!
//! with the finite-difference operators of [`crate::eigenc`]. The matrix is
//! `blockdiag(c^{-1} L_k^f, 0) + u b^T` with `u = (s1 w_k, 1)` and
//! `b = (J_k, alpha)`; time stepping uses this structure, the eigenvalue
//! search uses the assembled dense matrix.

use faer::prelude::*;
use faer::Mat;
use num_complex::Complex64;
use serde::Serialize;

use crate::config::TimeScheme;
use crate::eigenc::{alpha_for_mode, ModeDiscretization};
use crate::error::{Error, Result};
use crate::linalg::{dot, eig2, norm_inf, TridiagonalLu};
use crate::model::TumorModel;
use crate::radial::RadialFunction;
use crate::radialsim::measure_rate;
use crate::stationary::StationaryState;

pub const MAX_DENSE_GRID: usize = 4096;

#[derive(Debug, Clone)]
pub struct DiscreteModeOperator {
    pub k: usize,
    pub gamma: f64,
    pub c: f64,
    pub grid_n: usize,
    pub alpha: f64,
    pub disc: ModeDiscretization,
    /// Dense matrix over `(v_first, ..., v_{N-1}, eta)`.
    pub matrix: Mat<f64>,
}

/// Perturbation `(v, eta)`; `v` lives on `[0, 1]` with `v(1) = 0`.
#[derive(Debug, Clone)]
pub struct ModeState {
    pub k: usize,
    pub v: RadialFunction,
    pub eta: f64,
}

impl ModeState {
    /// `v = 0`, `eta = 1`.
    pub fn boundary_pulse(k: usize) -> Self {
        ModeState {
            k,
            v: RadialFunction::from_fn(1.0, 8, |_| 0.0),
            eta: 1.0,
        }
    }
}

pub fn assemble_mode_operator(
    model: &TumorModel,
    state: &StationaryState,
    k: usize,
    gamma: f64,
    c: f64,
    grid_n: usize,
) -> Result<DiscreteModeOperator> {
    if grid_n < 64 {
        return Err(Error::invalid(format!("grid_n = {grid_n} must be at least 64")));
    }
    if grid_n > MAX_DENSE_GRID {
        return Err(Error::invalid(format!("dense mode operators are limited to grid_n <= {MAX_DENSE_GRID}")));
    }
    if !(c > 0.0) {
        return Err(Error::invalid(format!("c = {c} must be positive")));
    }
    let disc = ModeDiscretization::new(model, state, k, grid_n)?;
    let alpha = alpha_for_mode(model, state, k, gamma)?;
    let matrix = dense_matrix(&disc, alpha, c);
    Ok(DiscreteModeOperator {
        k,
        gamma,
        c,
        grid_n,
        alpha,
        disc,
        matrix,
    })
}

fn dense_matrix(disc: &ModeDiscretization, alpha: f64, c: f64) -> Mat<f64> {
    let m = disc.unknowns();
    let s1 = disc.sigma_prime;
    let l = &disc.lf;
    let ic = 1.0 / c;
    Mat::from_fn(m + 1, m + 1, |i, j| {
        let ui = if i == m { 1.0 } else { s1 * disc.w[i] };
        let b = if j == m { alpha } else { disc.j_row[j] };
        let mut v = ui * b;
        if i < m && j < m {
            if i == j {
                v += ic * l.diag[i];
            } else if j + 1 == i {
                v += ic * l.lower[i];
            } else if i + 1 == j {
                v += ic * l.upper[i];
            }
        }
        v
    })
}

impl DiscreteModeOperator {
    pub fn dim(&self) -> usize {
        self.disc.unknowns() + 1
    }

    /// Structured product `M x`.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let m = self.disc.unknowns();
        let s = dot(&self.disc.j_row, &x[..m]) + self.alpha * x[m];
        let lv = self.disc.lf.matvec(&x[..m]);
        let mut out: Vec<f64> = lv
            .iter()
            .zip(&self.disc.w)
            .map(|(l, w)| l / self.c + self.disc.sigma_prime * w * s)
            .collect();
        out.push(s);
        out
    }

    /// Discretize a mode state on the operator's unknowns.
    pub fn pack(&self, state: &ModeState) -> Result<Vec<f64>> {
        if state.k != self.k {
            return Err(Error::invalid(format!("state has k = {}, operator k = {}", state.k, self.k)));
        }
        let mut x = self.disc.sample(&state.v);
        x.push(state.eta);
        Ok(x)
    }

    pub fn unpack(&self, x: &[f64]) -> ModeState {
        let m = self.disc.unknowns();
        ModeState {
            k: self.k,
            v: self.disc.to_profile(&x[..m]),
            eta: x[m],
        }
    }

    /// Kernel direction of the `k = 1` block, normalized in the max norm:
    /// the pure boundary shift `(0, 1)`, whose bulk counterpart in the
    /// pulled-back variables is `[phi(r - 1) r - 1] sigma_s'(r)`.
    pub fn translation_direction(&self) -> Vec<f64> {
        let mut x = vec![0.0; self.dim()];
        x[self.dim() - 1] = 1.0;
        x
    }
}

/// Solver for `(I - theta dt M) x = b` exploiting the rank-one structure.
struct ShiftedSolver {
    lu: TridiagonalLu,
    /// `(I - theta dt D)^{-1} u`.
    z: Vec<f64>,
    denom: f64,
    theta_dt: f64,
    alpha: f64,
}

impl ShiftedSolver {
    fn new(op: &DiscreteModeOperator, theta_dt: f64) -> Result<Self> {
        let d = &op.disc;
        let lu = d.lf.scaled_shifted(-theta_dt / op.c, 1.0).factor()?;
        let u: Vec<f64> = d.w.iter().map(|w| d.sigma_prime * w).collect();
        let mut z = lu.solve(&u);
        z.push(1.0);
        let bz = dot(&d.j_row, &z[..z.len() - 1]) + op.alpha;
        let denom = 1.0 - theta_dt * bz;
        if denom.abs() < 1e-14 {
            return Err(Error::numerical("time-step matrix is singular"));
        }
        Ok(ShiftedSolver {
            lu,
            z,
            denom,
            theta_dt,
            alpha: op.alpha,
        })
    }

    fn solve(&self, op: &DiscreteModeOperator, b: &[f64]) -> Vec<f64> {
        let m = op.disc.unknowns();
        let mut y = self.lu.solve(&b[..m]);
        y.push(b[m]);
        let by = dot(&op.disc.j_row, &y[..m]) + self.alpha * y[m];
        let f = self.theta_dt * by / self.denom;
        y.iter().zip(&self.z).map(|(a, z)| a + f * z).collect()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ModeTrajectory {
    pub t: Vec<f64>,
    pub norm: Vec<f64>,
    #[serde(skip)]
    pub final_state: Vec<f64>,
}

fn state_norm(x: &[f64]) -> f64 {
    norm_inf(x)
}

/// Time series of `max(|v|_inf, |eta|)` sampled every `stride` steps.
pub fn evolve_mode(
    op: &DiscreteModeOperator,
    init: &ModeState,
    dt: f64,
    t_end: f64,
    scheme: TimeScheme,
    stride: usize,
) -> Result<ModeTrajectory> {
    if !(dt > 0.0) || !(t_end >= 0.0) {
        return Err(Error::invalid("dt must be positive and t_end non-negative"));
    }
    let stride = stride.max(1);
    let steps = (t_end / dt).round() as usize;
    let mut x = op.pack(init)?;
    let theta = match scheme {
        TimeScheme::BackwardEuler => 1.0,
        TimeScheme::Trapezoidal => 0.5,
    };
    let solver = ShiftedSolver::new(op, theta * dt)?;
    let mut t = vec![0.0];
    let mut norm = vec![state_norm(&x)];
    for step in 1..=steps {
        let rhs = if theta < 1.0 {
            let mx = op.apply(&x);
            x.iter().zip(&mx).map(|(a, b)| a + (1.0 - theta) * dt * b).collect()
        } else {
            x.clone()
        };
        x = solver.solve(op, &rhs);
        if !x.iter().all(|v| v.is_finite()) {
            return Err(Error::numerical(format!("mode evolution overflowed at step {step}")));
        }
        if step % stride == 0 || step == steps {
            t.push(step as f64 * dt);
            norm.push(state_norm(&x));
        }
    }
    Ok(ModeTrajectory {
        t,
        norm,
        final_state: x,
    })
}

fn orthonormalize(a: &mut [f64], b: &mut [f64]) {
    let na = dot(a, a).sqrt();
    a.iter_mut().for_each(|v| *v /= na);
    let p = dot(a, b);
    b.iter_mut().zip(a.iter()).for_each(|(y, x)| *y -= p * x);
    let nb = dot(b, b).sqrt();
    b.iter_mut().for_each(|v| *v /= nb);
}

fn project_out(x: &mut [f64], d: Option<&[f64]>) {
    if let Some(d) = d {
        let p = dot(x, d) / dot(d, d);
        x.iter_mut().zip(d).for_each(|(a, b)| *a -= p * b);
    }
}

/// Eigenvalue of largest real part by block shifted inverse iteration
/// with a 2x2 Rayleigh-Ritz step.
pub fn dominant_eigen(op: &DiscreteModeOperator) -> Result<Complex64> {
    dominant_eigen_impl(op, None)
}

/// As [`dominant_eigen`] on the complement of a known kernel vector
/// (`M x0 = 0`), i.e. the largest real part of `sigma(M) \ {0}`.
pub fn dominant_eigen_deflated(op: &DiscreteModeOperator, x0: &[f64]) -> Result<Complex64> {
    let r = norm_inf(&op.apply(x0));
    if r > 1e-8 * norm_inf(x0) {
        return Err(Error::invalid(format!("deflation vector is not in the kernel (residual {r:.3e})")));
    }
    dominant_eigen_impl(op, Some(x0))
}

fn dominant_eigen_impl(op: &DiscreteModeOperator, deflate: Option<&[f64]>) -> Result<Complex64> {
    let n = op.dim();
    let shift = op.alpha.max(0.0) + op.alpha.abs().max(1.0);
    let mut shifted = op.matrix.clone();
    for i in 0..n {
        shifted[(i, i)] -= shift;
    }
    let lu = shifted.partial_piv_lu();
    let solve = |x: &[f64]| -> Vec<f64> {
        let rhs = Mat::from_fn(n, 1, |i, _| x[i]);
        let y = lu.solve(&rhs);
        (0..n).map(|i| y[(i, 0)]).collect()
    };
    let mut a: Vec<f64> = vec![0.0; n];
    a[n - 1] = 1.0;
    let mut b: Vec<f64> = (0..n).map(|i| ((i + 1) as f64 * 0.618_033_988_7).fract() - 0.5).collect();
    project_out(&mut a, deflate);
    if dot(&a, &a) == 0.0 {
        a = (0..n).map(|i| 1.0 + i as f64 / n as f64).collect();
        project_out(&mut a, deflate);
    }
    project_out(&mut b, deflate);
    orthonormalize(&mut a, &mut b);
    let mut last = Complex64::new(f64::INFINITY, 0.0);
    let tol = 1e-13;
    for _ in 0..500 {
        let mut na = solve(&a);
        let mut nb = solve(&b);
        project_out(&mut na, deflate);
        project_out(&mut nb, deflate);
        orthonormalize(&mut na, &mut nb);
        a = na;
        b = nb;
        let ma = op.apply(&a);
        let mb = op.apply(&b);
        let ev = eig2(dot(&a, &ma), dot(&a, &mb), dot(&b, &ma), dot(&b, &mb));
        let best = if ev[0].re >= ev[1].re { ev[0] } else { ev[1] };
        if (best - last).norm() <= tol * best.norm().max(1.0) {
            return Ok(best);
        }
        last = best;
    }
    Err(Error::NoConvergence {
        what: "dominant eigenvalue",
        iterations: 500,
        residual: f64::NAN,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ModeRunSummary {
    pub k: usize,
    pub gamma: f64,
    pub c: f64,
    pub dominant_re: f64,
    pub dominant_im: f64,
    pub measured_rate: f64,
}

/// Evolve from the boundary pulse and compare with the dominant eigenvalue.
pub fn mode_run(
    op: &DiscreteModeOperator,
    dt: f64,
    t_end: f64,
    scheme: TimeScheme,
    stride: usize,
    window: f64,
) -> Result<(ModeTrajectory, ModeRunSummary)> {
    let traj = evolve_mode(op, &ModeState::boundary_pulse(op.k), dt, t_end, scheme, stride)?;
    let dom = dominant_eigen(op)?;
    let rate = if traj.t.len() > 2 { measure_rate(&traj.t, &traj.norm, window)? } else { f64::NAN };
    Ok((
        traj,
        ModeRunSummary {
            k: op.k,
            gamma: op.gamma,
            c: op.c,
            dominant_re: dom.re,
            dominant_im: dom.im,
            measured_rate: rate,
        },
    ))
}
