//! Independent oracles shared by the integration tests. Nothing here calls
//! into the library's numerics.
#![allow(dead_code)]

pub const TOL: f64 = 1e-10;

pub fn coth(x: f64) -> f64 {
    1.0 / x.tanh()
}

/// Zero of `g` in the reference model.
pub fn st_ref() -> f64 {
    3.0 * (coth(1.0) - 1.0)
}

/// Reference stationary profile `sinh r / (r sinh 1)`.
pub fn sigma_ref(r: f64) -> f64 {
    if r == 0.0 {
        1.0 / 1f64.sinh()
    } else {
        r.sinh() / (r * 1f64.sinh())
    }
}

pub fn sigma_ref_prime(r: f64) -> f64 {
    if r == 0.0 {
        0.0
    } else {
        (r * r.cosh() - r.sinh()) / (r * r * 1f64.sinh())
    }
}

/// Recursive adaptive Simpson quadrature.
pub fn adapt(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn rec(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth > 48 || delta.abs() <= 15.0 * tol {
            left + right + delta / 15.0
        } else {
            rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth + 1) + rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth + 1)
        }
    }
    let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    rec(f, a, b, fa, fm, fb, whole, tol, 0)
}

/// Plain bisection for a sign change of `f` on `[a, b]`.
pub fn bisect(f: &dyn Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let fa = f(a);
    assert!(fa * f(b) < 0.0, "no sign change");
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if (f(m) > 0.0) == (fa > 0.0) {
            a = m;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

/// Power series of `ubar_k` for the reference model (`f' = 1`).
pub fn ubar_series(a_k: f64, r: f64) -> f64 {
    let mut c = 1.0;
    let mut sum = 1.0;
    let r2 = r * r;
    let mut p = 1.0;
    for m in 1..200 {
        c /= 2.0 * m as f64 * (2.0 * m as f64 - 1.0 + a_k);
        p *= r2;
        let term = c * p;
        sum += term;
        if term.abs() < 1e-18 * sum.abs() {
            break;
        }
    }
    sum
}

/// `gamma_k` of the reference model from the series `ubar_k` and adaptive
/// quadrature (`n = 3`, `g' = 1`, `sigma_s'(1) = coth 1 - 1`).
pub fn gamma_k_ref(k: usize) -> f64 {
    let n = 3.0;
    let kf = k as f64;
    let lambda = kf * kf + (n - 2.0) * kf;
    let a = 2.0 * kf + n - 1.0;
    let b = bracket_ref(a);
    (n - 1.0) / ((lambda - n + 1.0) * kf) * b
}

/// `g(sigma_bar) - sigma_s'(1)/ubar(1) int_0^1 ubar r^a dr` for the
/// reference model.
pub fn bracket_ref(a: f64) -> f64 {
    let integral = adapt(&|r: f64| ubar_series(a, r) * r.powf(a), 0.0, 1.0, 1e-15);
    (1.0 - st_ref()) - (coth(1.0) - 1.0) / ubar_series(a, 1.0) * integral
}
