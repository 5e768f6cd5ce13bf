//! Finite-dimensional equivariant flows `u' = F(u)` with a manifold of
//! equilibria generated by a group action: linearization and spectral
//! split, RK4 trajectories, identification of the limiting equilibrium, and
//! the integral identity characterizing the stable manifold of `u_s`.

use faer::Mat;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{dense_solve, eigenvalues, svd};

pub trait EquivariantSystem: Sync {
    fn dim(&self) -> usize;
    fn group_dim(&self) -> usize;
    fn field(&self, u: &[f64]) -> Vec<f64>;
    /// `S_sigma(u)`.
    fn action(&self, sigma: &[f64], u: &[f64]) -> Vec<f64>;
    fn equilibrium(&self) -> Vec<f64>;
    /// Search interval for each group parameter.
    fn group_bounds(&self) -> Vec<(f64, f64)>;
    /// Trajectories leaving this distance from `u_s` are rejected.
    fn neighborhood(&self) -> f64 {
        f64::INFINITY
    }
    fn known_omega_minus(&self) -> Option<f64> {
        None
    }
    /// Limit group element for initial data `u0`, when known in closed form.
    fn known_limit(&self, _u0: &[f64]) -> Option<Vec<f64>> {
        None
    }
}

/// `r' = r (1 - r)`, `theta' = 0` in Cartesian form, with rotations as the
/// group and `u_s = (1, 0)`.
#[derive(Debug, Clone, Copy, Default)]
pub struct RotationExample;

pub fn builtin_rotation_example() -> RotationExample {
    RotationExample
}

impl EquivariantSystem for RotationExample {
    fn dim(&self) -> usize {
        2
    }

    fn group_dim(&self) -> usize {
        1
    }

    fn field(&self, u: &[f64]) -> Vec<f64> {
        let r = u[0].hypot(u[1]);
        vec![(1.0 - r) * u[0], (1.0 - r) * u[1]]
    }

    fn action(&self, sigma: &[f64], u: &[f64]) -> Vec<f64> {
        let (s, c) = sigma[0].sin_cos();
        vec![c * u[0] - s * u[1], s * u[0] + c * u[1]]
    }

    fn equilibrium(&self) -> Vec<f64> {
        vec![1.0, 0.0]
    }

    fn group_bounds(&self) -> Vec<(f64, f64)> {
        vec![(-std::f64::consts::PI, std::f64::consts::PI)]
    }

    fn neighborhood(&self) -> f64 {
        2.5
    }

    fn known_omega_minus(&self) -> Option<f64> {
        Some(1.0)
    }

    fn known_limit(&self, u0: &[f64]) -> Option<Vec<f64>> {
        Some(vec![u0[1].atan2(u0[0])])
    }
}

/// Max-norm of `F(S_sigma u) - DS_sigma(u) F(u)` over the given samples,
/// with `DS_sigma` by central differences of step `h`.
pub fn equivariance_residual<S: EquivariantSystem + ?Sized>(
    sys: &S,
    samples: &[(Vec<f64>, Vec<f64>)],
    h: f64,
) -> f64 {
    let n = sys.dim();
    let mut worst: f64 = 0.0;
    for (sigma, u) in samples {
        let lhs = sys.field(&sys.action(sigma, u));
        let fu = sys.field(u);
        // directional derivative of S_sigma at u along F(u)
        let plus: Vec<f64> = (0..n).map(|i| u[i] + h * fu[i]).collect();
        let minus: Vec<f64> = (0..n).map(|i| u[i] - h * fu[i]).collect();
        let sp = sys.action(sigma, &plus);
        let sm = sys.action(sigma, &minus);
        for i in 0..n {
            worst = worst.max((lhs[i] - (sp[i] - sm[i]) / (2.0 * h)).abs());
        }
    }
    worst
}

#[derive(Debug, Clone)]
pub struct SpectralSplit {
    pub a: Mat<f64>,
    /// Columns span `Ker A`.
    pub kernel: Mat<f64>,
    /// Projection onto `Ker A` along `Range A`.
    pub projection: Mat<f64>,
    pub omega_minus: f64,
    pub eigenvalues: Vec<num_complex::Complex64>,
}

impl SpectralSplit {
    pub fn kernel_dim(&self) -> usize {
        self.kernel.ncols()
    }

    pub fn project(&self, x: &[f64]) -> Vec<f64> {
        matvec(&self.projection, x)
    }

    /// Same split with `P` replaced by `I - P`; only useful as a negative
    /// control.
    pub fn swapped(&self) -> SpectralSplit {
        let n = self.projection.nrows();
        let mut out = self.clone();
        out.projection = Mat::from_fn(n, n, |i, j| f64::from(u8::from(i == j)) - self.projection[(i, j)]);
        out
    }
}

fn matvec(m: &Mat<f64>, x: &[f64]) -> Vec<f64> {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)] * x[j]).sum()).collect()
}

/// Minimal gap between 0 and the nonzero spectrum.
pub const SPECTRAL_GAP: f64 = 1e-3;

pub fn linearize<S: EquivariantSystem + ?Sized>(sys: &S, h: f64) -> Result<SpectralSplit> {
    if !(1e-7..=1e-4).contains(&h) {
        return Err(Error::invalid(format!("difference step h = {h} must lie in [1e-7, 1e-4]")));
    }
    let n = sys.dim();
    let us = sys.equilibrium();
    let f0 = sys.field(&us);
    let f0n = f0.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if f0n > 1e-12 {
        return Err(Error::invalid(format!("F(u_s) = {f0n:.3e} is not an equilibrium")));
    }
    let mut a = Mat::<f64>::zeros(n, n);
    for j in 0..n {
        let mut p = us.clone();
        let mut m = us.clone();
        p[j] += h;
        m[j] -= h;
        let fp = sys.field(&p);
        let fm = sys.field(&m);
        for i in 0..n {
            a[(i, j)] = (fp[i] - fm[i]) / (2.0 * h);
        }
    }
    let (u, s, v) = svd(&a)?;
    let norm = s[0];
    let thresh = 1e-6 * norm;
    let small: Vec<usize> = (0..n).filter(|&i| s[i] <= thresh).collect();
    let g = sys.group_dim();
    if small.len() != g {
        return Err(Error::invalid(format!(
            "kernel dimension {} differs from group dimension {g}",
            small.len()
        )));
    }
    let kernel = Mat::from_fn(n, g, |i, j| v[(i, small[j])]);
    let left = Mat::from_fn(n, g, |i, j| u[(i, small[j])]);
    // P = K (L^T K)^{-1} L^T
    let ltk = Mat::from_fn(g, g, |i, j| (0..n).map(|r| left[(r, i)] * kernel[(r, j)]).sum());
    let mut projection = Mat::<f64>::zeros(n, n);
    for col in 0..n {
        let rhs: Vec<f64> = (0..g).map(|i| left[(col, i)]).collect();
        let y = dense_solve(&ltk, &rhs);
        if !y.iter().all(|v| v.is_finite()) {
            return Err(Error::numerical("kernel and range of A are not complementary"));
        }
        for row in 0..n {
            projection[(row, col)] = (0..g).map(|j| kernel[(row, j)] * y[j]).sum();
        }
    }
    let ev = eigenvalues(&a)?;
    let mut nonzero: Vec<_> = ev.iter().filter(|z| z.norm() > thresh).collect();
    if nonzero.len() + g != n {
        return Err(Error::numerical("eigenvalue count near zero does not match the kernel"));
    }
    if let Some(z) = nonzero.iter().find(|z| z.norm() < SPECTRAL_GAP) {
        return Err(Error::invalid(format!(
            "eigenvalue {z} lies within the required gap {SPECTRAL_GAP} of zero"
        )));
    }
    nonzero.sort_by(|a, b| b.re.total_cmp(&a.re));
    let omega_minus = nonzero.first().map(|z| -z.re).unwrap_or(f64::INFINITY);
    if !(omega_minus > 0.0) {
        return Err(Error::invalid(format!("omega_minus = {omega_minus} is not positive")));
    }
    Ok(SpectralSplit {
        a,
        kernel,
        projection,
        omega_minus,
        eigenvalues: ev,
    })
}

#[derive(Debug, Clone)]
pub struct FlowTrajectory {
    pub t: Vec<f64>,
    pub u: Vec<Vec<f64>>,
}

impl FlowTrajectory {
    pub fn last(&self) -> &[f64] {
        self.u.last().unwrap()
    }
}

fn rk4_step<S: EquivariantSystem + ?Sized>(sys: &S, u: &[f64], dt: f64) -> Vec<f64> {
    let add = |a: &[f64], b: &[f64], s: f64| -> Vec<f64> { a.iter().zip(b).map(|(x, y)| x + s * y).collect() };
    let k1 = sys.field(u);
    let k2 = sys.field(&add(u, &k1, 0.5 * dt));
    let k3 = sys.field(&add(u, &k2, 0.5 * dt));
    let k4 = sys.field(&add(u, &k3, dt));
    (0..u.len())
        .map(|i| u[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect()
}

/// Classical RK4, sampled every `stride` steps.
pub fn integrate_flow<S: EquivariantSystem + ?Sized>(
    sys: &S,
    u0: &[f64],
    t_end: f64,
    dt: f64,
    stride: usize,
) -> Result<FlowTrajectory> {
    if u0.len() != sys.dim() {
        return Err(Error::invalid(format!("initial state must have {} components", sys.dim())));
    }
    if !(dt > 0.0 && t_end >= 0.0) {
        return Err(Error::invalid("dt must be positive and t_end non-negative"));
    }
    let us = sys.equilibrium();
    let radius = sys.neighborhood();
    let dist = |u: &[f64]| u.iter().zip(&us).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    if dist(u0) > radius {
        return Err(Error::invalid("initial state outside the neighborhood of u_s"));
    }
    let steps = (t_end / dt).round() as usize;
    let stride = stride.max(1);
    let mut u = u0.to_vec();
    let mut traj = FlowTrajectory {
        t: vec![0.0],
        u: vec![u.clone()],
    };
    for step in 1..=steps {
        u = rk4_step(sys, &u, dt);
        if !(dist(&u) <= radius) {
            return Err(Error::numerical(format!("trajectory left the neighborhood at t = {}", step as f64 * dt)));
        }
        if step % stride == 0 || step == steps {
            traj.t.push(step as f64 * dt);
            traj.u.push(u.clone());
        }
    }
    Ok(traj)
}

#[derive(Debug, Clone, Serialize)]
pub struct LimitIdentification {
    pub sigma: Vec<f64>,
    pub limit: Vec<f64>,
    /// `|S_sigma(u_s) - u(t_end)|`.
    pub residual: f64,
}

fn golden<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while (b - a).abs() > tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

/// Group element whose equilibrium `S_sigma(u_s)` is closest to the tail of
/// the trajectory: coarse scan and golden-section search per parameter,
/// then a joint Newton polish on the least-squares objective.
pub fn limit_identify<S: EquivariantSystem + ?Sized>(
    sys: &S,
    traj: &FlowTrajectory,
    _split: &SpectralSplit,
) -> Result<LimitIdentification> {
    let m = traj.u.len();
    if m < 2 {
        return Err(Error::invalid("trajectory too short"));
    }
    let end = traj.last().to_vec();
    let tail_start = m - (m / 10).max(1) - 1;
    let variation = traj.u[tail_start..]
        .iter()
        .map(|u| u.iter().zip(&end).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
        .fold(0.0, f64::max);
    if variation > 1e-8 {
        return Err(Error::invalid(format!("trajectory has not converged (tail variation {variation:.3e})")));
    }
    let us = sys.equilibrium();
    let obj = |sigma: &[f64]| -> f64 {
        sys.action(sigma, &us).iter().zip(&end).map(|(a, b)| (a - b).powi(2)).sum()
    };
    let bounds = sys.group_bounds();
    let g = bounds.len();
    let mut sigma: Vec<f64> = bounds.iter().map(|(a, b)| 0.5 * (a + b)).collect();
    for (p, &(lo, hi)) in bounds.iter().enumerate() {
        let scan = 64;
        let step = (hi - lo) / scan as f64;
        let mut best = (f64::INFINITY, lo);
        for i in 0..=scan {
            let mut s = sigma.clone();
            s[p] = lo + i as f64 * step;
            let v = obj(&s);
            if v < best.0 {
                best = (v, s[p]);
            }
        }
        let a = (best.1 - step).max(lo);
        let b = (best.1 + step).min(hi);
        sigma[p] = golden(
            |x| {
                let mut s = sigma.clone();
                s[p] = x;
                obj(&s)
            },
            a,
            b,
            1e-10,
        );
    }
    let h = 1e-5;
    for _ in 0..20 {
        let mut grad = vec![0.0; g];
        let mut hess = Mat::<f64>::zeros(g, g);
        let f0 = obj(&sigma);
        for i in 0..g {
            let mut p = sigma.clone();
            let mut q = sigma.clone();
            p[i] += h;
            q[i] -= h;
            let (fp, fq) = (obj(&p), obj(&q));
            grad[i] = (fp - fq) / (2.0 * h);
            hess[(i, i)] = (fp - 2.0 * f0 + fq) / (h * h);
            for j in 0..i {
                let mut pp = sigma.clone();
                pp[i] += h;
                pp[j] += h;
                let mut pm = sigma.clone();
                pm[i] += h;
                pm[j] -= h;
                let mut mp = sigma.clone();
                mp[i] -= h;
                mp[j] += h;
                let mut mm = sigma.clone();
                mm[i] -= h;
                mm[j] -= h;
                let v = (obj(&pp) - obj(&pm) - obj(&mp) + obj(&mm)) / (4.0 * h * h);
                hess[(i, j)] = v;
                hess[(j, i)] = v;
            }
        }
        let step = dense_solve(&hess, &grad);
        if !step.iter().all(|v| v.is_finite()) {
            break;
        }
        let trial: Vec<f64> = sigma.iter().zip(&step).map(|(s, d)| s - d).collect();
        if obj(&trial) > f0 {
            break;
        }
        let size = step.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        sigma = trial;
        if size < 1e-13 {
            break;
        }
    }
    let limit = sys.action(&sigma, &us);
    let residual = obj(&sigma).sqrt();
    if residual > 1e-6 {
        return Err(Error::numerical(format!(
            "trajectory tail is {residual:.3e} away from the equilibrium manifold"
        )));
    }
    Ok(LimitIdentification { sigma, limit, residual })
}

/// Least-squares rate of `|u(t) - limit|` over `t in [t_lo, t_hi]`.
pub fn convergence_rate(traj: &FlowTrajectory, limit: &[f64], t_lo: f64, t_hi: f64) -> Result<f64> {
    let (ts, vs): (Vec<f64>, Vec<f64>) = traj
        .t
        .iter()
        .zip(&traj.u)
        .filter(|(&t, _)| t >= t_lo && t <= t_hi)
        .map(|(&t, u)| (t, u.iter().zip(limit).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt()))
        .unzip();
    if ts.len() < 2 {
        return Err(Error::invalid("rate window holds fewer than two samples"));
    }
    crate::radialsim::measure_rate(&ts, &vs, 1.0)
}

/// `| P(u0 - u_s) + int_0^inf P N(u(s)) ds |` with `N(u) = F(u) - A(u - u_s)`;
/// trapezoid on the samples plus a geometric tail fitted on the last ten.
pub fn check_limit_identity<S: EquivariantSystem + ?Sized>(
    sys: &S,
    traj: &FlowTrajectory,
    split: &SpectralSplit,
) -> Result<f64> {
    let us = sys.equilibrium();
    let n = sys.dim();
    let end = traj.last();
    let gap = end.iter().zip(&us).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    if gap > 1e-6 {
        return Err(Error::invalid(format!("trajectory does not converge to u_s (distance {gap:.3e})")));
    }
    let integrand: Vec<Vec<f64>> = traj
        .u
        .iter()
        .map(|u| {
            let d: Vec<f64> = u.iter().zip(&us).map(|(a, b)| a - b).collect();
            let ad = matvec(&split.a, &d);
            let nu: Vec<f64> = sys.field(u).iter().zip(&ad).map(|(f, a)| f - a).collect();
            split.project(&nu)
        })
        .collect();
    let mut total = split.project(&traj.u[0].iter().zip(&us).map(|(a, b)| a - b).collect::<Vec<f64>>());
    for w in 1..traj.t.len() {
        let dt = traj.t[w] - traj.t[w - 1];
        for i in 0..n {
            total[i] += 0.5 * dt * (integrand[w][i] + integrand[w - 1][i]);
        }
    }
    let m = traj.t.len();
    if m > 10 {
        let last = &integrand[m - 1];
        let early = &integrand[m - 10];
        let nl = last.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let ne = early.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        if nl > 0.0 && ne > 0.0 {
            let q = (nl / ne).powf(1.0 / 9.0);
            if q < 1.0 {
                let dt = traj.t[m - 1] - traj.t[m - 2];
                for i in 0..n {
                    total[i] += last[i] * dt * q / (1.0 - q);
                }
            } else if nl > 1e-12 {
                return Err(Error::invalid("integrand does not decay on the tail"));
            }
        }
    }
    Ok(total.iter().map(|v| v * v).sum::<f64>().sqrt())
}

#[derive(Debug, Clone, Serialize)]
pub struct CmReport {
    pub omega_minus: f64,
    pub kernel_dim: usize,
    pub sigma_hat: Vec<f64>,
    pub rate_measured: f64,
    pub identity_residual: f64,
}

/// Full desk-scale demonstration on the built-in example: limit
/// identification from `(r0, theta0)` and the identity residual in the
/// `theta = 0` slice from radius `slice_r0`.
pub fn cm_demo(r0: f64, theta0: f64, slice_r0: f64, t_end: f64, dt: f64) -> Result<CmReport> {
    let sys = builtin_rotation_example();
    let split = linearize(&sys, 1e-6)?;
    let u0 = [r0 * theta0.cos(), r0 * theta0.sin()];
    let traj = integrate_flow(&sys, &u0, t_end, dt, 1)?;
    let id = limit_identify(&sys, &traj, &split)?;
    let rate = convergence_rate(&traj, &id.limit, 5.0, 25.0)?;
    let slice = integrate_flow(&sys, &[slice_r0, 0.0], t_end, dt, 1)?;
    let residual = check_limit_identity(&sys, &slice, &split)?;
    Ok(CmReport {
        omega_minus: split.omega_minus,
        kernel_dim: split.kernel_dim(),
        sigma_hat: id.sigma,
        rate_measured: rate,
        identity_residual: residual,
    })
}
