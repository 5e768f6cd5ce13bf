//! Translations acting on boundary graphs `r = 1 + rho(omega)`, the
//! harmonic extension into the unit ball and the Hanzawa map.
//!
//! Graph functions are band-limited expansions in real spherical harmonics
//! (`n = 3`) or a Fourier basis (`n = 2`), orthonormal on the sphere. Each
//! carries its samples on a product quadrature grid that integrates
//! products of basis functions exactly.

use std::f64::consts::PI;
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};

pub const DEFAULT_DELTA: f64 = 0.1;
pub const DEFAULT_EPSILON: f64 = 0.05;
pub const DEFAULT_KMAX_3D: usize = 16;
pub const DEFAULT_KMAX_2D: usize = 64;
pub const GENERATOR_STEP: f64 = 1e-5;

/// Smooth cutoff with `phi = 1` on `|tau| <= delta`, `phi = 0` on
/// `|tau| >= 3 delta` and `sup |phi'| = 0.625 / delta`.
///
/// On the transition the profile is `1 - Psi((|tau| - delta) / (2 delta))`
/// where `Psi` is linear with slope `1.25` in the middle and joins the
/// constants through quartic blends on ramps of width `0.2`, so it is C².
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CutoffProfile {
    pub delta: f64,
}

const RAMP: f64 = 0.2;

impl CutoffProfile {
    pub fn new(delta: f64) -> Result<Self> {
        if !(delta > 0.0 && delta < 0.2) {
            return Err(Error::invalid(format!("cutoff width delta = {delta} must lie in (0, 1/5)")));
        }
        Ok(CutoffProfile { delta })
    }

    fn psi(u: f64) -> (f64, f64) {
        let p = 1.0 / (1.0 - RAMP);
        if u <= 0.0 {
            (0.0, 0.0)
        } else if u >= 1.0 {
            (1.0, 0.0)
        } else if u < RAMP {
            let s = u / RAMP;
            (p * RAMP * (s.powi(3) - 0.5 * s.powi(4)), p * (3.0 * s * s - 2.0 * s.powi(3)))
        } else if u > 1.0 - RAMP {
            let v = (1.0 - u) / RAMP;
            (1.0 - p * RAMP * (v.powi(3) - 0.5 * v.powi(4)), p * (3.0 * v * v - 2.0 * v.powi(3)))
        } else {
            (0.5 * p * RAMP + p * (u - RAMP), p)
        }
    }

    pub fn eval(&self, tau: f64) -> f64 {
        1.0 - Self::psi((tau.abs() - self.delta) / (2.0 * self.delta)).0
    }

    pub fn deriv(&self, tau: f64) -> f64 {
        let d = -Self::psi((tau.abs() - self.delta) / (2.0 * self.delta)).1 / (2.0 * self.delta);
        if tau < 0.0 {
            -d
        } else {
            d
        }
    }

    /// Exact supremum of `|phi'|`.
    pub fn max_slope(&self) -> f64 {
        0.5 / ((1.0 - RAMP) * self.delta)
    }
}

impl Default for CutoffProfile {
    fn default() -> Self {
        CutoffProfile { delta: DEFAULT_DELTA }
    }
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(m: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; m];
    let mut w = vec![0.0; m];
    for i in 0..m.div_ceil(2) {
        let mut t = (PI * (i as f64 + 0.75) / (m as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, t);
            for j in 2..=m {
                let p2 = ((2 * j - 1) as f64 * t * p1 - (j - 1) as f64 * p0) / j as f64;
                p0 = p1;
                p1 = p2;
            }
            if m == 1 {
                p1 = t;
                p0 = 1.0;
            }
            dp = m as f64 * (t * p1 - p0) / (t * t - 1.0);
            let dt = p1 / dp;
            t -= dt;
            if dt.abs() < 1e-16 {
                break;
            }
        }
        x[i] = t;
        x[m - 1 - i] = -t;
        w[i] = 2.0 / ((1.0 - t * t) * dp * dp);
        w[m - 1 - i] = w[i];
    }
    (x, w)
}

/// Number of basis functions up to degree `k_max`.
pub fn basis_len(n: usize, k_max: usize) -> usize {
    if n == 2 {
        2 * k_max + 1
    } else {
        (k_max + 1) * (k_max + 1)
    }
}

/// `(k, l)` labels of the coefficient at `index`; `l` runs over `1..=dim`
/// of the degree-`k` space.
pub fn basis_label(n: usize, index: usize) -> (usize, usize) {
    if n == 2 {
        if index == 0 {
            (0, 1)
        } else {
            (index.div_ceil(2), 2 - index % 2)
        }
    } else {
        let k = (index as f64).sqrt() as usize;
        let k = if (k + 1) * (k + 1) <= index { k + 1 } else if k * k > index { k - 1 } else { k };
        (k, index - k * k + 1)
    }
}

/// Values of all basis functions at the unit vector `p`.
pub fn basis_values(n: usize, k_max: usize, p: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; basis_len(n, k_max)];
    if n == 2 {
        let th = p[1].atan2(p[0]);
        out[0] = 1.0 / (2.0 * PI).sqrt();
        let s = 1.0 / PI.sqrt();
        for k in 1..=k_max {
            let a = k as f64 * th;
            out[2 * k - 1] = s * a.cos();
            out[2 * k] = s * a.sin();
        }
        return out;
    }
    let (x, y, t) = (p[0], p[1], p[2]);
    // (x + i y)^m
    let mut cre = 1.0;
    let mut cim = 0.0;
    let mut qmm = 1.0 / (4.0 * PI).sqrt();
    for m in 0..=k_max {
        if m > 0 {
            qmm *= ((2 * m + 1) as f64 / (2 * m) as f64).sqrt();
            let (r, i) = (cre * x - cim * y, cre * y + cim * x);
            cre = r;
            cim = i;
        }
        let mut q_prev = 0.0;
        let mut q = qmm;
        for l in m..=k_max {
            if l == m + 1 {
                q_prev = q;
                q = t * ((2 * m + 3) as f64).sqrt() * qmm;
            } else if l > m + 1 {
                let lf = l as f64;
                let mf = m as f64;
                let a = ((4.0 * lf * lf - 1.0) / (lf * lf - mf * mf)).sqrt();
                let b = (((lf - 1.0).powi(2) - mf * mf) / (4.0 * (lf - 1.0).powi(2) - 1.0)).sqrt();
                let next = a * (t * q - b * q_prev);
                q_prev = q;
                q = next;
            }
            let base = l * l + l;
            if m == 0 {
                out[base] = q;
            } else {
                let s = std::f64::consts::SQRT_2 * q;
                out[base + m] = s * cre;
                out[base - m] = s * cim;
            }
        }
    }
    out
}

/// Product quadrature on `S^{n-1}` with precomputed basis values.
#[derive(Debug, Clone)]
pub struct SphereGrid {
    pub n: usize,
    pub k_max: usize,
    pub points: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
    /// Node-major table of basis values.
    basis: Vec<f64>,
    /// Extra `(n_theta, n_phi)` shape for sample output.
    pub shape: (usize, usize),
}

impl SphereGrid {
    pub fn new(n: usize, k_max: usize) -> Result<Arc<Self>> {
        if n != 2 && n != 3 {
            return Err(Error::invalid(format!("graph functions are available for n = 2, 3 (got {n})")));
        }
        if k_max == 0 {
            return Err(Error::invalid("k_max must be positive"));
        }
        let mut points = Vec::new();
        let mut weights = Vec::new();
        let shape;
        if n == 2 {
            let m = 4 * (k_max + 1);
            for j in 0..m {
                let th = 2.0 * PI * j as f64 / m as f64;
                points.push([th.cos(), th.sin(), 0.0]);
                weights.push(2.0 * PI / m as f64);
            }
            shape = (m, 1);
        } else {
            let nt = 2 * (k_max + 1);
            let np = 4 * (k_max + 1);
            let (ct, wt) = gauss_legendre(nt);
            for (&c, &w) in ct.iter().zip(&wt) {
                let s = (1.0 - c * c).sqrt();
                for j in 0..np {
                    let ph = 2.0 * PI * j as f64 / np as f64;
                    points.push([s * ph.cos(), s * ph.sin(), c]);
                    weights.push(w * 2.0 * PI / np as f64);
                }
            }
            shape = (nt, np);
        }
        let nb = basis_len(n, k_max);
        let mut basis = Vec::with_capacity(points.len() * nb);
        for p in &points {
            basis.extend(basis_values(n, k_max, p));
        }
        Ok(Arc::new(SphereGrid {
            n,
            k_max,
            points,
            weights,
            basis,
            shape,
        }))
    }

    pub fn default_for(n: usize) -> Result<Arc<Self>> {
        SphereGrid::new(n, if n == 2 { DEFAULT_KMAX_2D } else { DEFAULT_KMAX_3D })
    }

    pub fn basis_len(&self) -> usize {
        basis_len(self.n, self.k_max)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    fn row(&self, i: usize) -> &[f64] {
        let nb = self.basis_len();
        &self.basis[i * nb..(i + 1) * nb]
    }

    /// Point of the grid as a slice of length `n`.
    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i][..self.n]
    }

    pub fn synthesize(&self, coeffs: &[f64]) -> Vec<f64> {
        (0..self.len()).map(|i| self.row(i).iter().zip(coeffs).map(|(a, b)| a * b).sum()).collect()
    }

    pub fn project(&self, samples: &[f64]) -> Vec<f64> {
        let mut c = vec![0.0; self.basis_len()];
        for (i, (&s, &w)) in samples.iter().zip(&self.weights).enumerate() {
            let sw = s * w;
            for (cj, bj) in c.iter_mut().zip(self.row(i)) {
                *cj += sw * bj;
            }
        }
        c
    }
}

/// Band-limited boundary graph `rho` with cached samples.
#[derive(Debug, Clone)]
pub struct GraphFunction {
    grid: Arc<SphereGrid>,
    coeffs: Vec<f64>,
    samples: Vec<f64>,
}

fn unit(v: &[f64]) -> Vec<f64> {
    let r = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter().map(|x| x / r).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl GraphFunction {
    pub fn from_coeffs(grid: &Arc<SphereGrid>, coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.len() != grid.basis_len() {
            return Err(Error::invalid(format!(
                "expected {} coefficients, got {}",
                grid.basis_len(),
                coeffs.len()
            )));
        }
        let samples = grid.synthesize(&coeffs);
        Ok(GraphFunction {
            grid: grid.clone(),
            coeffs,
            samples,
        })
    }

    /// Project samples on the grid nodes onto the basis.
    pub fn from_samples(grid: &Arc<SphereGrid>, samples: &[f64]) -> Result<Self> {
        if samples.len() != grid.len() {
            return Err(Error::invalid("sample count does not match the grid"));
        }
        GraphFunction::from_coeffs(grid, grid.project(samples))
    }

    pub fn from_fn(grid: &Arc<SphereGrid>, f: impl Fn(&[f64]) -> f64) -> Self {
        let s: Vec<f64> = (0..grid.len()).map(|i| f(grid.point(i))).collect();
        GraphFunction::from_samples(grid, &s).expect("grid-sized samples")
    }

    pub fn zero(grid: &Arc<SphereGrid>) -> Self {
        GraphFunction::from_coeffs(grid, vec![0.0; grid.basis_len()]).expect("sized")
    }

    pub fn grid(&self) -> &Arc<SphereGrid> {
        &self.grid
    }

    pub fn n(&self) -> usize {
        self.grid.n
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    /// Value at a unit vector.
    pub fn eval(&self, p: &[f64]) -> f64 {
        dot(&basis_values(self.grid.n, self.grid.k_max, p), &self.coeffs)
    }

    pub fn sup_norm(&self) -> f64 {
        self.samples.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Sup of the tangential gradient on the grid (central differences
    /// along great circles).
    pub fn max_gradient(&self) -> f64 {
        let h: f64 = 1e-5;
        let n = self.grid.n;
        (0..self.grid.len())
            .map(|i| {
                let p = self.grid.point(i);
                let tangents = tangent_frame(p);
                let g2: f64 = tangents
                    .iter()
                    .map(|e| {
                        let plus: Vec<f64> = (0..n).map(|j| h.cos() * p[j] + h.sin() * e[j]).collect();
                        let minus: Vec<f64> = (0..n).map(|j| h.cos() * p[j] - h.sin() * e[j]).collect();
                        let d = (self.eval(&plus) - self.eval(&minus)) / (2.0 * h);
                        d * d
                    })
                    .sum();
                g2.sqrt()
            })
            .fold(0.0, f64::max)
    }

    pub fn c1_norm(&self) -> f64 {
        self.sup_norm().max(self.max_gradient())
    }

    /// `max |coefficient difference|`.
    pub fn coeff_distance(&self, other: &GraphFunction) -> f64 {
        self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }

    /// `max |sample difference|` on the grid.
    pub fn sample_distance(&self, other: &GraphFunction) -> f64 {
        self.samples.iter().zip(&other.samples).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }

    pub fn linear_combination(&self, a: f64, other: &GraphFunction, b: f64) -> GraphFunction {
        let c = self.coeffs.iter().zip(&other.coeffs).map(|(x, y)| a * x + b * y).collect();
        GraphFunction::from_coeffs(&self.grid, c).expect("same grid")
    }

    /// Rows `(k, l, b_kl)`.
    pub fn coefficient_rows(&self) -> Vec<(usize, usize, f64)> {
        self.coeffs
            .iter()
            .enumerate()
            .map(|(i, &b)| {
                let (k, l) = basis_label(self.grid.n, i);
                (k, l, b)
            })
            .collect()
    }

    /// Rows `(theta, phi, rho)` of the samples (`phi = 0` for `n = 2`).
    pub fn sample_rows(&self) -> Vec<(f64, f64, f64)> {
        (0..self.grid.len())
            .map(|i| {
                let p = self.grid.points[i];
                if self.grid.n == 2 {
                    (p[1].atan2(p[0]), 0.0, self.samples[i])
                } else {
                    (p[2].clamp(-1.0, 1.0).acos(), p[1].atan2(p[0]), self.samples[i])
                }
            })
            .collect()
    }
}

fn tangent_frame(p: &[f64]) -> Vec<Vec<f64>> {
    if p.len() == 2 {
        return vec![vec![-p[1], p[0]]];
    }
    let a = if p[0].abs() < 0.9 { [1.0, 0.0, 0.0] } else { [0.0, 1.0, 0.0] };
    let d = dot(&a, p);
    let e1 = unit(&[a[0] - d * p[0], a[1] - d * p[1], a[2] - d * p[2]]);
    let e2 = vec![
        p[1] * e1[2] - p[2] * e1[1],
        p[2] * e1[0] - p[0] * e1[2],
        p[0] * e1[1] - p[1] * e1[0],
    ];
    vec![e1, e2]
}

/// `Pi(rho)(x) = sum b_kl |x|^k Y_kl(x / |x|)`.
pub fn harmonic_extension(rho: &GraphFunction, x: &[f64]) -> Result<f64> {
    let n = rho.n();
    if x.len() != n {
        return Err(Error::invalid(format!("point must have {n} components")));
    }
    let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    if r > 1.0 + 1e-14 {
        return Err(Error::invalid(format!("|x| = {r} exceeds 1")));
    }
    if r == 0.0 {
        return Ok(rho.coeffs[0] * basis_values(n, 0, &unit_axis(n))[0]);
    }
    let p: Vec<f64> = x.iter().map(|v| v / r).collect();
    let vals = basis_values(n, rho.grid.k_max, &p);
    Ok(vals
        .iter()
        .zip(&rho.coeffs)
        .enumerate()
        .map(|(i, (y, b))| r.powi(basis_label(n, i).0 as i32) * y * b)
        .sum())
}

fn unit_axis(n: usize) -> Vec<f64> {
    let mut v = vec![0.0; n];
    v[0] = 1.0;
    v
}

/// `Theta_rho(x) = x + phi(|x| - 1) Pi(rho)(x) x / |x|`.
pub fn hanzawa_map(rho: &GraphFunction, phi: &CutoffProfile, x: &[f64]) -> Result<Vec<f64>> {
    let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    if r == 0.0 {
        return Ok(x.to_vec());
    }
    let weight = phi.eval(r - 1.0);
    if weight == 0.0 {
        return Ok(x.to_vec());
    }
    let ext = harmonic_extension(rho, x)?;
    Ok(x.iter().map(|v| v + weight * ext * v / r).collect())
}

/// Radius `t` along `omega'` where the translated surface is met:
/// `|t omega' - z| = 1 + rho(unit(t omega' - z))`, by the secant method.
fn translated_radius(rho: &GraphFunction, wp: &[f64], z: &[f64]) -> Result<f64> {
    let h = |t: f64| {
        let y: Vec<f64> = wp.iter().zip(z).map(|(a, b)| t * a - b).collect();
        let r = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        r - 1.0 - rho.eval(&unit(&y))
    };
    let mut t0 = 1.0 + rho.eval(wp) + dot(z, wp);
    let mut h0 = h(t0);
    if h0 == 0.0 {
        return Ok(t0);
    }
    let mut t1 = t0 - h0;
    for _ in 0..60 {
        let h1 = h(t1);
        if h1 == 0.0 || (t1 - t0).abs() < 1e-15 {
            return Ok(t1);
        }
        let denom = h1 - h0;
        if denom == 0.0 || !denom.is_finite() {
            break;
        }
        let t2 = t1 - h1 * (t1 - t0) / denom;
        t0 = t1;
        h0 = h1;
        t1 = t2;
        if !(t1 > 0.0) {
            break;
        }
    }
    Err(Error::NoConvergence {
        what: "translated graph radius",
        iterations: 60,
        residual: h(t1).abs(),
    })
}

/// `S_z^*(rho)`: graph of the hypersurface `r = 1 + rho` shifted by `z`,
/// sampled on the grid and projected back onto the basis.
pub fn translate_graph(rho: &GraphFunction, z: &[f64], epsilon: f64, delta: f64) -> Result<GraphFunction> {
    let n = rho.n();
    if z.len() != n {
        return Err(Error::invalid(format!("shift must have {n} components")));
    }
    let zn = z.iter().map(|v| v * v).sum::<f64>().sqrt();
    if zn >= epsilon {
        return Err(Error::invalid(format!("|z| = {zn} must be below epsilon = {epsilon}")));
    }
    if rho.sup_norm() >= delta {
        return Err(Error::invalid(format!("sup |rho| = {} must be below delta = {delta}", rho.sup_norm())));
    }
    if zn == 0.0 {
        return Ok(rho.clone());
    }
    let grid = &rho.grid;
    let samples = (0..grid.len())
        .into_par_iter()
        .map(|i| translated_radius(rho, grid.point(i), z).map(|t| t - 1.0))
        .collect::<Result<Vec<f64>>>()?;
    GraphFunction::from_samples(grid, &samples)
}

/// `(S_{eps z}^*(0) - S_{-eps z}^*(0)) / (2 eps)`.
pub fn infinitesimal_generator(grid: &Arc<SphereGrid>, z: &[f64], eps: f64) -> Result<GraphFunction> {
    let zero = GraphFunction::zero(grid);
    let plus: Vec<f64> = z.iter().map(|v| eps * v).collect();
    let minus: Vec<f64> = z.iter().map(|v| -eps * v).collect();
    let limit = 2.0 * eps * z.iter().map(|v| v * v).sum::<f64>().sqrt() + 1.0;
    let a = translate_graph(&zero, &plus, limit, DEFAULT_DELTA)?;
    let b = translate_graph(&zero, &minus, limit, DEFAULT_DELTA)?;
    Ok(a.linear_combination(0.5 / eps, &b, -0.5 / eps))
}

/// Closed form of `S_z^*(0)` at `omega'`.
pub fn shifted_sphere_radius(z: &[f64], wp: &[f64]) -> f64 {
    let zw = dot(z, wp);
    zw + (1.0 - dot(z, z) + zw * zw).sqrt() - 1.0
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let (x, w) = gauss_legendre(5);
        let s: f64 = x.iter().zip(&w).map(|(a, b)| a.powi(8) * b).sum();
        assert!((s - 2.0 / 9.0).abs() < 1e-14);
        assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-14);
    }

    #[test]
    fn labels_round_trip() {
        assert_eq!(basis_label(3, 0), (0, 1));
        assert_eq!(basis_label(3, 3), (1, 3));
        assert_eq!(basis_label(3, 4), (2, 1));
        assert_eq!(basis_label(3, 288), (16, 33));
        assert_eq!(basis_label(2, 1), (1, 1));
        assert_eq!(basis_label(2, 2), (1, 2));
    }

    #[test]
    fn cutoff_slope() {
        let phi = CutoffProfile::new(0.1).unwrap();
        assert!(phi.max_slope() < 2.0 / 0.3);
        let mut worst: f64 = 0.0;
        for i in 0..=4000 {
            let t = -0.4 + 0.8 * i as f64 / 4000.0;
            worst = worst.max(phi.deriv(t).abs());
        }
        assert!((worst - phi.max_slope()).abs() < 1e-12);
    }
}
