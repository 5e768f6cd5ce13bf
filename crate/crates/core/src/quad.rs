//! Quadrature rules on uniform grids and an adaptive rule for smooth
//! integrands.

use crate::error::{Error, Result};

/// Composite Simpson rule for samples `ys` on a uniform grid of spacing `h`.
/// An odd number of intervals is closed with the 3/8 rule on the last three.
pub fn simpson(ys: &[f64], h: f64) -> Result<f64> {
    let m = ys.len().saturating_sub(1);
    if m < 2 {
        return Err(Error::invalid(format!("Simpson rule needs at least 2 intervals, got {m}")));
    }
    let (even_end, tail) = if m.is_multiple_of(2) { (m, 0.0) } else if m >= 3 {
        let j = m - 3;
        (j, 3.0 * h / 8.0 * (ys[j] + 3.0 * ys[j + 1] + 3.0 * ys[j + 2] + ys[j + 3]))
    } else {
        unreachable!()
    };
    let mut s = 0.0;
    if even_end > 0 {
        s = ys[0] + ys[even_end];
        for (i, y) in ys.iter().enumerate().take(even_end).skip(1) {
            s += if i % 2 == 1 { 4.0 * y } else { 2.0 * y };
        }
        s *= h / 3.0;
    }
    Ok(s + tail)
}

/// Fourth-order cumulative integral `out[j] = int_{x_0}^{x_j} y`, using the
/// cubic through the four nearest samples on every interval.
pub fn cumulative(ys: &[f64], h: f64) -> Vec<f64> {
    let n = ys.len();
    let mut out = vec![0.0; n];
    if n < 2 {
        return out;
    }
    if n < 4 {
        for j in 1..n {
            out[j] = out[j - 1] + 0.5 * h * (ys[j - 1] + ys[j]);
        }
        return out;
    }
    let last = n - 1;
    for j in 0..last {
        let piece = if j == 0 {
            h * (9.0 * ys[0] + 19.0 * ys[1] - 5.0 * ys[2] + ys[3]) / 24.0
        } else if j == last - 1 {
            h * (ys[j - 2] - 5.0 * ys[j - 1] + 19.0 * ys[j] + 9.0 * ys[j + 1]) / 24.0
        } else {
            h * (-ys[j - 1] + 13.0 * ys[j] + 13.0 * ys[j + 1] - ys[j + 2]) / 24.0
        };
        out[j + 1] = out[j] + piece;
    }
    out
}

/// Trapezoid rule on arbitrary abscissae.
pub fn trapezoid(xs: &[f64], ys: &[f64]) -> f64 {
    xs.windows(2)
        .zip(ys.windows(2))
        .map(|(x, y)| 0.5 * (x[1] - x[0]) * (y[0] + y[1]))
        .sum()
}

/// Adaptive Gauss-Kronrod (7/15) quadrature of `f` over `[a, b]`.
pub fn adaptive<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, tol: f64) -> f64 {
    fn gk(f: &mut dyn FnMut(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
        const XK: [f64; 8] = [
            0.991_455_371_120_812_6,
            0.949_107_912_342_758_5,
            0.864_864_423_359_769_1,
            0.741_531_185_599_394_4,
            0.586_087_235_467_691_1,
            0.405_845_151_377_397_2,
            0.207_784_955_007_898_5,
            0.0,
        ];
        const WK: [f64; 8] = [
            0.022_935_322_010_529_22,
            0.063_092_092_629_978_55,
            0.104_790_010_322_250_2,
            0.140_653_259_715_525_9,
            0.169_004_726_639_267_9,
            0.190_350_578_064_785_4,
            0.204_432_940_075_298_9,
            0.209_482_141_084_728_0,
        ];
        const WG: [f64; 4] = [
            0.129_484_966_168_869_7,
            0.279_705_391_489_276_7,
            0.381_830_050_505_118_9,
            0.417_959_183_673_469_4,
        ];
        let c = 0.5 * (a + b);
        let hw = 0.5 * (b - a);
        let fc = f(c);
        let mut k = WK[7] * fc;
        let mut g = WG[3] * fc;
        for i in 0..7 {
            let x = hw * XK[i];
            let s = f(c - x) + f(c + x);
            k += WK[i] * s;
            if i % 2 == 1 {
                g += WG[i / 2] * s;
            }
        }
        (k * hw, ((k - g) * hw).abs())
    }
    let mut stack = vec![(a, b, 0usize)];
    let mut total = 0.0;
    while let Some((lo, hi, depth)) = stack.pop() {
        let (v, err) = gk(&mut f, lo, hi);
        let local_tol = tol * (hi - lo) / (b - a);
        if err <= local_tol.max(1e-300) || depth > 40 {
            total += v;
        } else {
            let mid = 0.5 * (lo + hi);
            stack.push((lo, mid, depth + 1));
            stack.push((mid, hi, depth + 1));
        }
    }
    total
}
