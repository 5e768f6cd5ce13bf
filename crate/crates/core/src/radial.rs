//! Sampled radial profiles and the RK4 integrator for singular radial ODEs
//! `y'' + (a / r) y' = F(r, y)` started at the origin.

use crate::error::{Error, Result};

/// Values of a function of `r` on a strictly increasing grid starting at 0.
///
/// With derivative samples the interpolant is piecewise cubic Hermite,
/// otherwise the cubic through the four nearest nodes. Both reproduce the
/// nodal values exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialFunction {
    nodes: Vec<f64>,
    values: Vec<f64>,
    derivs: Option<Vec<f64>>,
}

impl RadialFunction {
    pub fn new(nodes: Vec<f64>, values: Vec<f64>, derivs: Option<Vec<f64>>) -> Result<Self> {
        if nodes.len() < 2 || nodes.len() != values.len() {
            return Err(Error::invalid("radial function needs at least two nodes and matching values"));
        }
        if nodes[0] != 0.0 {
            return Err(Error::invalid("radial grid must start at r = 0"));
        }
        if nodes.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::invalid("radial grid must be strictly increasing"));
        }
        if let Some(d) = &derivs {
            if d.len() != nodes.len() {
                return Err(Error::invalid("derivative samples do not match the grid"));
            }
        }
        Ok(RadialFunction { nodes, values, derivs })
    }

    /// Uniform grid on `[0, r_end]` with `values.len() - 1` intervals.
    pub fn uniform(r_end: f64, values: Vec<f64>, derivs: Option<Vec<f64>>) -> Result<Self> {
        let n = values.len().saturating_sub(1).max(1);
        let nodes = uniform_nodes(r_end, n);
        RadialFunction::new(nodes, values, derivs)
    }

    /// Sample `f` on a uniform grid with `intervals` intervals.
    pub fn from_fn(r_end: f64, intervals: usize, f: impl Fn(f64) -> f64) -> Self {
        let nodes = uniform_nodes(r_end, intervals);
        let values = nodes.iter().map(|&r| f(r)).collect();
        RadialFunction {
            nodes,
            values,
            derivs: None,
        }
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn derivs(&self) -> Option<&[f64]> {
        self.derivs.as_deref()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn r_end(&self) -> f64 {
        *self.nodes.last().unwrap()
    }

    pub fn last_value(&self) -> f64 {
        *self.values.last().unwrap()
    }

    /// Grid spacing if the grid is uniform (to rounding).
    pub fn uniform_spacing(&self) -> Option<f64> {
        let n = self.nodes.len() - 1;
        let h = self.r_end() / n as f64;
        let ok = self
            .nodes
            .iter()
            .enumerate()
            .all(|(i, &r)| (r - i as f64 * h).abs() <= 1e-12 * self.r_end().max(1.0));
        ok.then_some(h)
    }

    fn locate(&self, r: f64) -> usize {
        let n = self.nodes.len();
        match self.nodes.binary_search_by(|x| x.partial_cmp(&r).unwrap()) {
            Ok(i) => i.min(n - 2),
            Err(0) => 0,
            Err(i) => (i - 1).min(n - 2),
        }
    }

    /// Interpolated value; `r` outside the grid is extrapolated from the
    /// end interval.
    pub fn eval(&self, r: f64) -> f64 {
        let i = self.locate(r);
        if let Some(d) = &self.derivs {
            let (x0, x1) = (self.nodes[i], self.nodes[i + 1]);
            let h = x1 - x0;
            let t = (r - x0) / h;
            let (t2, t3) = (t * t, t * t * t);
            let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
            let h10 = t3 - 2.0 * t2 + t;
            let h01 = -2.0 * t3 + 3.0 * t2;
            let h11 = t3 - t2;
            return h00 * self.values[i] + h10 * h * d[i] + h01 * self.values[i + 1] + h11 * h * d[i + 1];
        }
        let (lo, hi) = self.stencil(i);
        let mut s = 0.0;
        for j in lo..hi {
            let mut w = 1.0;
            for m in lo..hi {
                if m != j {
                    w *= (r - self.nodes[m]) / (self.nodes[j] - self.nodes[m]);
                }
            }
            s += w * self.values[j];
        }
        s
    }

    /// Interpolated derivative.
    pub fn eval_deriv(&self, r: f64) -> f64 {
        let i = self.locate(r);
        if let Some(d) = &self.derivs {
            let (x0, x1) = (self.nodes[i], self.nodes[i + 1]);
            let h = x1 - x0;
            let t = (r - x0) / h;
            let t2 = t * t;
            let d00 = (6.0 * t2 - 6.0 * t) / h;
            let d10 = 3.0 * t2 - 4.0 * t + 1.0;
            let d01 = (-6.0 * t2 + 6.0 * t) / h;
            let d11 = 3.0 * t2 - 2.0 * t;
            return d00 * self.values[i] + d10 * d[i] + d01 * self.values[i + 1] + d11 * d[i + 1];
        }
        let (lo, hi) = self.stencil(i);
        let mut s = 0.0;
        for j in lo..hi {
            let mut dw = 0.0;
            for k in lo..hi {
                if k == j {
                    continue;
                }
                let mut w = 1.0 / (self.nodes[j] - self.nodes[k]);
                for m in lo..hi {
                    if m != j && m != k {
                        w *= (r - self.nodes[m]) / (self.nodes[j] - self.nodes[m]);
                    }
                }
                dw += w;
            }
            s += dw * self.values[j];
        }
        s
    }

    fn stencil(&self, i: usize) -> (usize, usize) {
        let n = self.nodes.len();
        let width = n.min(4);
        let lo = i.saturating_sub(1).min(n - width);
        (lo, lo + width)
    }

    /// Resample on a uniform grid of `[0, r_end]`.
    pub fn resample(&self, intervals: usize) -> RadialFunction {
        let nodes = uniform_nodes(self.r_end(), intervals);
        let values = nodes.iter().map(|&r| self.eval(r)).collect();
        let derivs = self
            .derivs
            .as_ref()
            .map(|_| nodes.iter().map(|&r| self.eval_deriv(r)).collect());
        RadialFunction { nodes, values, derivs }
    }

    /// Same samples seen in the coordinate `r / radius`.
    pub fn rescaled(&self, radius: f64) -> RadialFunction {
        let mut nodes: Vec<f64> = self.nodes.iter().map(|r| r / radius).collect();
        let n = nodes.len();
        nodes[n - 1] = self.r_end() / radius;
        RadialFunction {
            nodes,
            values: self.values.clone(),
            derivs: self.derivs.as_ref().map(|d| d.iter().map(|v| v * radius).collect()),
        }
    }

    pub fn max_abs_diff(&self, other: &RadialFunction) -> f64 {
        self.nodes
            .iter()
            .zip(&self.values)
            .map(|(&r, &v)| (v - other.eval(r)).abs())
            .fold(0.0, f64::max)
    }
}

pub fn uniform_nodes(r_end: f64, intervals: usize) -> Vec<f64> {
    let mut nodes: Vec<f64> = (0..=intervals).map(|i| r_end * i as f64 / intervals as f64).collect();
    nodes[intervals] = r_end;
    nodes
}

/// Samples of an integrated radial IVP.
#[derive(Debug, Clone)]
pub struct IvpSolution {
    pub r: Vec<f64>,
    pub y: Vec<f64>,
    pub dy: Vec<f64>,
    /// Radius where `y` first reached the target value, if a target was set.
    pub hit: Option<f64>,
}

impl IvpSolution {
    pub fn into_radial(self) -> Result<RadialFunction> {
        RadialFunction::new(self.r, self.y, Some(self.dy))
    }
}

/// Integrator for `y'' + (a / r) y' = F(r, y)` with `y(0) = y0`, `y'(0) = 0`.
///
/// The singular origin is stepped over with the two-term series
/// `y(h) = y0 + F(0, y0) h^2 / (2 (a + 1))` plus a quartic correction;
/// afterwards classical RK4 with a
/// fixed step, subdivided close to the origin where `a / r` is stiff.
pub struct RadialIvp<F> {
    pub a: f64,
    pub y0: f64,
    pub rhs: F,
}

impl<F: FnMut(f64, f64) -> Result<f64>> RadialIvp<F> {
    pub fn new(a: f64, y0: f64, rhs: F) -> Self {
        RadialIvp { a, y0, rhs }
    }

    fn deriv(&mut self, r: f64, y: f64, p: f64) -> Result<(f64, f64)> {
        Ok((p, (self.rhs)(r, y)? - self.a * p / r))
    }

    fn rk4(&mut self, r: f64, y: f64, p: f64, h: f64) -> Result<(f64, f64)> {
        let (k1y, k1p) = self.deriv(r, y, p)?;
        let (k2y, k2p) = self.deriv(r + 0.5 * h, y + 0.5 * h * k1y, p + 0.5 * h * k1p)?;
        let (k3y, k3p) = self.deriv(r + 0.5 * h, y + 0.5 * h * k2y, p + 0.5 * h * k2p)?;
        let (k4y, k4p) = self.deriv(r + h, y + h * k3y, p + h * k3p)?;
        Ok((
            y + h / 6.0 * (k1y + 2.0 * k2y + 2.0 * k3y + k4y),
            p + h / 6.0 * (k1p + 2.0 * k2p + 2.0 * k3p + k4p),
        ))
    }

    /// Advance from `r > 0` by `h` (possibly a partial step).
    fn advance(&mut self, r: f64, y: f64, p: f64, h: f64) -> Result<(f64, f64)> {
        let m = ((self.a * h / (2.0 * r)).ceil() as usize).max(1);
        let sub = h / m as f64;
        let (mut yy, mut pp, mut rr) = (y, p, r);
        for _ in 0..m {
            let (ny, np) = self.rk4(rr, yy, pp, sub)?;
            yy = ny;
            pp = np;
            rr += sub;
        }
        Ok((yy, pp))
    }

    /// Integrate with step `h` for at most `steps` steps. With a `target`,
    /// integration stops as soon as `y >= target`; the crossing is located
    /// by bisection of the partial step to 1e-12 and appended as last node.
    pub fn integrate(&mut self, h: f64, steps: usize, target: Option<f64>) -> Result<IvpSolution> {
        let mut sol = IvpSolution {
            r: Vec::with_capacity(steps + 1),
            y: Vec::with_capacity(steps + 1),
            dy: Vec::with_capacity(steps + 1),
            hit: None,
        };
        sol.r.push(0.0);
        sol.y.push(self.y0);
        sol.dy.push(0.0);
        if let Some(t) = target {
            if self.y0 >= t {
                sol.hit = Some(0.0);
                return Ok(sol);
            }
        }
        if steps == 0 {
            return Ok(sol);
        }
        let f0 = (self.rhs)(0.0, self.y0)?;
        let a = self.a;
        let mut y = self.y0 + f0 * h * h / (2.0 * (a + 1.0));
        let mut p = f0 * h / (a + 1.0);
        // Two corrector sweeps with F(s) ~ F0 + (F1 - F0)(s/h)^2 inside
        // y'(r) = r^{-a} int_0^r s^a F ds; keeps the start fourth order.
        for _ in 0..2 {
            let df = (self.rhs)(h, y)? - f0;
            y = self.y0 + h * h * (f0 / (2.0 * (a + 1.0)) + df / (4.0 * (a + 3.0)));
            p = h * (f0 / (a + 1.0) + df / (a + 3.0));
        }
        let mut r = h;
        if let Some(t) = target {
            if y >= t {
                // crossing inside the series interval: y - y0 ~ r^2
                let tau = h * ((t - self.y0) / (y - self.y0)).sqrt();
                let pt = f0 * tau / (self.a + 1.0);
                sol.r.push(tau);
                sol.y.push(t);
                sol.dy.push(pt);
                sol.hit = Some(tau);
                return Ok(sol);
            }
        }
        sol.r.push(r);
        sol.y.push(y);
        sol.dy.push(p);
        for i in 1..steps {
            let (ny, np) = self.advance(r, y, p, h)?;
            if !ny.is_finite() || !np.is_finite() {
                return Err(Error::numerical(format!("radial integration blew up at r = {r}")));
            }
            if let Some(t) = target {
                if ny >= t {
                    let (mut lo, mut hi) = (0.0, h);
                    let mut at = (ny, np);
                    while hi - lo > 1e-12 {
                        let mid = 0.5 * (lo + hi);
                        let s = self.advance(r, y, p, mid)?;
                        if s.0 >= t {
                            hi = mid;
                            at = s;
                        } else {
                            lo = mid;
                        }
                    }
                    let rh = r + hi;
                    sol.r.push(rh);
                    sol.y.push(at.0);
                    sol.dy.push(at.1);
                    sol.hit = Some(rh);
                    return Ok(sol);
                }
            }
            y = ny;
            p = np;
            r = (i + 1) as f64 * h;
            sol.r.push(r);
            sol.y.push(y);
            sol.dy.push(p);
        }
        Ok(sol)
    }
}

/// Solve a tridiagonal system by the Thomas algorithm. `lower[0]` and
/// `upper[n-1]` are ignored.
pub fn solve_tridiagonal(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &[f64]) -> Result<Vec<f64>> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    let mut beta = diag[0];
    if beta == 0.0 {
        return Err(Error::numerical("zero pivot in tridiagonal solve"));
    }
    c[0] = if n > 1 { upper[0] / beta } else { 0.0 };
    d[0] = rhs[0] / beta;
    for i in 1..n {
        beta = diag[i] - lower[i] * c[i - 1];
        if beta == 0.0 || !beta.is_finite() {
            return Err(Error::numerical("zero pivot in tridiagonal solve"));
        }
        if i + 1 < n {
            c[i] = upper[i] / beta;
        }
        d[i] = (rhs[i] - lower[i] * d[i - 1]) / beta;
    }
    for i in (0..n - 1).rev() {
        d[i] -= c[i] * d[i + 1];
    }
    Ok(d)
}
