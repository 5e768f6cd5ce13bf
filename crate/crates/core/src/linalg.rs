//! Small linear-algebra helpers: tridiagonal matrices with a reusable LU
//! factorization, and thin wrappers around dense routines.

use faer::prelude::*;
use faer::Mat;
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Tridiagonal matrix; `lower[0]` and `upper[n-1]` are unused.
#[derive(Debug, Clone, PartialEq)]
pub struct Tridiagonal {
    pub lower: Vec<f64>,
    pub diag: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Tridiagonal {
    pub fn zeros(n: usize) -> Self {
        Tridiagonal {
            lower: vec![0.0; n],
            diag: vec![0.0; n],
            upper: vec![0.0; n],
        }
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let n = self.len();
        (0..n)
            .map(|i| {
                let mut s = self.diag[i] * x[i];
                if i > 0 {
                    s += self.lower[i] * x[i - 1];
                }
                if i + 1 < n {
                    s += self.upper[i] * x[i + 1];
                }
                s
            })
            .collect()
    }

    pub fn transpose(&self) -> Tridiagonal {
        let n = self.len();
        let mut t = Tridiagonal::zeros(n);
        for i in 0..n {
            t.diag[i] = self.diag[i];
            if i > 0 {
                t.lower[i] = self.upper[i - 1];
            }
            if i + 1 < n {
                t.upper[i] = self.lower[i + 1];
            }
        }
        t
    }

    /// `alpha * self + beta * I`.
    pub fn scaled_shifted(&self, alpha: f64, beta: f64) -> Tridiagonal {
        Tridiagonal {
            lower: self.lower.iter().map(|v| alpha * v).collect(),
            diag: self.diag.iter().map(|v| alpha * v + beta).collect(),
            upper: self.upper.iter().map(|v| alpha * v).collect(),
        }
    }

    pub fn factor(&self) -> Result<TridiagonalLu> {
        let n = self.len();
        let mut mult = vec![0.0; n];
        let mut piv = vec![0.0; n];
        piv[0] = self.diag[0];
        for i in 1..n {
            if piv[i - 1] == 0.0 || !piv[i - 1].is_finite() {
                return Err(Error::numerical("singular tridiagonal matrix"));
            }
            mult[i] = self.lower[i] / piv[i - 1];
            piv[i] = self.diag[i] - mult[i] * self.upper[i - 1];
        }
        if piv[n - 1] == 0.0 || !piv[n - 1].is_finite() {
            return Err(Error::numerical("singular tridiagonal matrix"));
        }
        Ok(TridiagonalLu {
            mult,
            piv,
            upper: self.upper.clone(),
        })
    }

    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        Ok(self.factor()?.solve(rhs))
    }

    pub fn to_dense(&self) -> Mat<f64> {
        let n = self.len();
        Mat::from_fn(n, n, |i, j| {
            if i == j {
                self.diag[i]
            } else if j + 1 == i {
                self.lower[i]
            } else if i + 1 == j {
                self.upper[i]
            } else {
                0.0
            }
        })
    }
}

/// LU factors of a tridiagonal matrix without pivoting.
#[derive(Debug, Clone)]
pub struct TridiagonalLu {
    mult: Vec<f64>,
    piv: Vec<f64>,
    upper: Vec<f64>,
}

impl TridiagonalLu {
    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let n = self.piv.len();
        let mut y = rhs.to_vec();
        for i in 1..n {
            y[i] -= self.mult[i] * y[i - 1];
        }
        y[n - 1] /= self.piv[n - 1];
        for i in (0..n - 1).rev() {
            y[i] = (y[i] - self.upper[i] * y[i + 1]) / self.piv[i];
        }
        y
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm_inf(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Eigenvalues of a dense real matrix.
pub fn eigenvalues(a: &Mat<f64>) -> Result<Vec<Complex64>> {
    let ev = a
        .eigenvalues()
        .map_err(|e| Error::numerical(format!("eigenvalue computation failed: {e:?}")))?;
    Ok(ev.into_iter().map(|z| Complex64::new(z.re, z.im)).collect())
}

/// Eigenvalues of a real 2x2 matrix.
pub fn eig2(a: f64, b: f64, c: f64, d: f64) -> [Complex64; 2] {
    let tr = 0.5 * (a + d);
    let det = a * d - b * c;
    let disc = tr * tr - det;
    if disc >= 0.0 {
        let s = disc.sqrt();
        // avoid cancellation in the smaller root
        let big = if tr >= 0.0 { tr + s } else { tr - s };
        let small = if big != 0.0 { det / big } else { 0.0 };
        [Complex64::new(big, 0.0), Complex64::new(small, 0.0)]
    } else {
        let s = (-disc).sqrt();
        [Complex64::new(tr, s), Complex64::new(tr, -s)]
    }
}

/// Solve `a x = b` by partial-pivoting LU.
pub fn dense_solve(a: &Mat<f64>, b: &[f64]) -> Vec<f64> {
    let lu = a.partial_piv_lu();
    let rhs = Mat::from_fn(b.len(), 1, |i, _| b[i]);
    let x = lu.solve(&rhs);
    (0..b.len()).map(|i| x[(i, 0)]).collect()
}

/// Full SVD `a = U diag(s) V^T` with singular values in decreasing order.
pub fn svd(a: &Mat<f64>) -> Result<(Mat<f64>, Vec<f64>, Mat<f64>)> {
    let d = a.svd().map_err(|e| Error::numerical(format!("SVD failed: {e:?}")))?;
    let s = d.S().column_vector();
    let s: Vec<f64> = (0..s.nrows()).map(|i| s[i]).collect();
    Ok((d.U().to_owned(), s, d.V().to_owned()))
}
