//! The tumor model: nutrient consumption `f`, proliferation rate `g` and the
//! scalar parameters, validated against the structural assumptions
//!
//! * (A1) `f(0) = 0` and `f' > 0`,
//! * (A2) `g' > 0` and `g(sigma_tilde) = 0`,
//! * (A3) `sigma_tilde < sigma_bar`.

use crate::config::ConfigMap;
use crate::error::{Error, Result};
use crate::expr::{parse_expr, Expr};

/// Number of uniform sample points used for the assumption checks.
pub const ASSUMPTION_SAMPLES: usize = 1000;
/// Strictness tolerance of the sampled sign conditions.
pub const STRICT_TOL: f64 = 1e-12;
/// Root tolerance for `sigma_tilde`.
pub const ROOT_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct TumorModel {
    /// Spatial dimension.
    pub n: usize,
    pub f: Expr,
    pub g: Expr,
    pub df: Expr,
    pub dg: Expr,
    pub sigma_bar: f64,
    pub sigma_tilde: f64,
    /// Ratio of nutrient diffusion time to tumor doubling time.
    pub c: f64,
    /// Surface tension coefficient.
    pub gamma: f64,
}

impl TumorModel {
    /// Assemble and validate a model. When `sigma_tilde` is `None` it is
    /// located by bisection on `[0, sigma_bar]`.
    pub fn new(
        n: usize,
        f: Expr,
        g: Expr,
        sigma_bar: f64,
        sigma_tilde: Option<f64>,
        c: f64,
        gamma: f64,
    ) -> Result<Self> {
        if n < 2 {
            return Err(Error::invalid(format!("dimension n = {n} must be at least 2")));
        }
        if !(sigma_bar.is_finite() && sigma_bar > 0.0) {
            return Err(Error::invalid(format!("sigma_bar = {sigma_bar} must be positive")));
        }
        if !(c.is_finite() && c >= 0.0) {
            return Err(Error::invalid(format!("c = {c} must be non-negative")));
        }
        if !(gamma.is_finite() && gamma > 0.0) {
            return Err(Error::invalid(format!("gamma = {gamma} must be positive")));
        }
        let df = f.diff();
        let dg = g.diff();
        let sigma_tilde = match sigma_tilde {
            Some(s) => s,
            None => locate_root(&g, sigma_bar)?,
        };
        let model = TumorModel {
            n,
            f,
            g,
            df,
            dg,
            sigma_bar,
            sigma_tilde,
            c,
            gamma,
        };
        model.validate()?;
        Ok(model)
    }

    /// Assemble a model without checking (A1)-(A3). Intended for limiting
    /// cases such as `f' = 0` that the checked constructor rejects.
    pub fn new_unchecked(n: usize, f: Expr, g: Expr, sigma_bar: f64, sigma_tilde: f64, c: f64, gamma: f64) -> Self {
        let df = f.diff();
        let dg = g.diff();
        TumorModel {
            n,
            f,
            g,
            df,
            dg,
            sigma_bar,
            sigma_tilde,
            c,
            gamma,
        }
    }

    /// Check (A1)-(A3) on the sample grid.
    pub fn validate(&self) -> Result<()> {
        let at = |cond: &'static str, point: f64, e: Error| Error::Assumption {
            condition: cond,
            point,
            detail: e.to_string(),
        };
        if !self.sigma_tilde.is_finite() {
            return Err(Error::invalid("sigma_tilde must be finite"));
        }
        let f0 = self.f.eval(0.0).map_err(|e| at("(A1)", 0.0, e))?;
        if f0.abs() > STRICT_TOL {
            return Err(Error::Assumption {
                condition: "(A1)",
                point: 0.0,
                detail: format!("f(0) = {f0} is not zero"),
            });
        }
        let upper = self.sigma_bar.max(self.sigma_tilde) + 1.0;
        for i in 0..ASSUMPTION_SAMPLES {
            let s = upper * i as f64 / (ASSUMPTION_SAMPLES - 1) as f64;
            let dfs = self.df.eval(s).map_err(|e| at("(A1)", s, e))?;
            if dfs <= STRICT_TOL {
                return Err(Error::Assumption {
                    condition: "(A1)",
                    point: s,
                    detail: format!("f'(sigma) = {dfs} is not positive"),
                });
            }
            self.f.eval(s).map_err(|e| at("(A1)", s, e))?;
            let dgs = self.dg.eval(s).map_err(|e| at("(A2)", s, e))?;
            if dgs <= STRICT_TOL {
                return Err(Error::Assumption {
                    condition: "(A2)",
                    point: s,
                    detail: format!("g'(sigma) = {dgs} is not positive"),
                });
            }
            self.g.eval(s).map_err(|e| at("(A2)", s, e))?;
        }
        let st = self.sigma_tilde;
        let gt = self.g.eval(st).map_err(|e| at("(A2)", st, e))?;
        let slope = self.dg.eval(st).map_err(|e| at("(A2)", st, e))?;
        if gt.abs() > 2.0 * ROOT_TOL * slope.abs().max(1.0) {
            return Err(Error::Assumption {
                condition: "(A2)",
                point: st,
                detail: format!("g(sigma_tilde) = {gt:e} is not zero"),
            });
        }
        if !(st < self.sigma_bar) {
            return Err(Error::Assumption {
                condition: "(A3)",
                point: st,
                detail: format!("sigma_tilde = {st} is not below sigma_bar = {}", self.sigma_bar),
            });
        }
        Ok(())
    }

    #[inline]
    pub fn f_at(&self, s: f64) -> Result<f64> {
        self.f.eval(s)
    }

    #[inline]
    pub fn g_at(&self, s: f64) -> Result<f64> {
        self.g.eval(s)
    }

    #[inline]
    pub fn df_at(&self, s: f64) -> Result<f64> {
        self.df.eval(s)
    }

    #[inline]
    pub fn dg_at(&self, s: f64) -> Result<f64> {
        self.dg.eval(s)
    }

    pub fn with_gamma(&self, gamma: f64) -> Self {
        TumorModel { gamma, ..self.clone() }
    }

    pub fn with_c(&self, c: f64) -> Self {
        TumorModel { c, ..self.clone() }
    }

    /// Multiply `g` by a positive constant.
    pub fn with_scaled_g(&self, lambda: f64) -> Self {
        let g = self.g.scaled(lambda);
        let dg = g.diff();
        TumorModel { g, dg, ..self.clone() }
    }

    /// Model seen in the coordinate `r / radius`: `f` and `g` pick up a
    /// factor `radius^2`, the surface tension becomes `gamma / radius`.
    pub fn rescaled(&self, radius: f64) -> Self {
        let s = radius * radius;
        let f = self.f.scaled(s);
        let g = self.g.scaled(s);
        TumorModel {
            n: self.n,
            df: f.diff(),
            dg: g.diff(),
            f,
            g,
            sigma_bar: self.sigma_bar,
            sigma_tilde: self.sigma_tilde,
            c: self.c,
            gamma: self.gamma / radius,
        }
    }
}

fn locate_root(g: &Expr, sigma_bar: f64) -> Result<f64> {
    let ga = g.eval(0.0).map_err(|e| Error::Assumption {
        condition: "(A2)",
        point: 0.0,
        detail: e.to_string(),
    })?;
    let gb = g.eval(sigma_bar).map_err(|e| Error::Assumption {
        condition: "(A2)",
        point: sigma_bar,
        detail: e.to_string(),
    })?;
    if gb <= 0.0 {
        return Err(Error::Assumption {
            condition: "(A3)",
            point: sigma_bar,
            detail: format!("g(sigma_bar) = {gb} is not positive, so the zero of g is not below sigma_bar"),
        });
    }
    if ga > 0.0 {
        return Err(Error::Assumption {
            condition: "(A2)",
            point: 0.0,
            detail: format!("g(0) = {ga} is positive, g has no zero in [0, sigma_bar]"),
        });
    }
    let (mut lo, mut hi) = (0.0_f64, sigma_bar);
    while hi - lo > ROOT_TOL {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if g.eval(mid)? > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// `3 (coth 1 - 1)`, the zero of `g` in the reference model.
pub fn reference_sigma_tilde() -> f64 {
    3.0 * (1.0 / 1f64.tanh() - 1.0)
}

/// Reference model: `n = 3`, `f = sigma`, `g = sigma - 3(coth 1 - 1)`,
/// `sigma_bar = 1`. Its stationary radius is exactly 1 with
/// `sigma_s(r) = sinh r / (r sinh 1)`.
pub fn reference_model(c: f64, gamma: f64) -> TumorModel {
    let st = reference_sigma_tilde();
    TumorModel::new(
        3,
        Expr::Var,
        Expr::sub(Expr::Var, Expr::Const(st)),
        1.0,
        Some(st),
        c,
        gamma,
    )
    .expect("reference model satisfies (A1)-(A3)")
}

/// Build a model from the keys `n, f, g, sigma_bar, sigma_tilde, c, gamma`.
/// `sigma_tilde` is optional, `c` defaults to 0 and `gamma` to 1.
pub fn build_model(cfg: &ConfigMap) -> Result<TumorModel> {
    let n = cfg.require_usize("n")?;
    let f = parse_expr(cfg.require("f")?)?;
    let g = parse_expr(cfg.require("g")?)?;
    let sigma_bar = cfg.require_f64("sigma_bar")?;
    let sigma_tilde = cfg.get_f64("sigma_tilde")?;
    let c = cfg.get_f64("c")?.unwrap_or(0.0);
    let gamma = cfg.get_f64("gamma")?.unwrap_or(1.0);
    TumorModel::new(n, f, g, sigma_bar, sigma_tilde, c, gamma)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(text: &str) -> ConfigMap {
        ConfigMap::parse(text).unwrap()
    }

    #[test]
    fn linear_model_root() {
        let m = build_model(&cfg("n=3\nf=sigma\ng=sigma-0.93911\nsigma_bar=1\nc=0\ngamma=1")).unwrap();
        assert!((m.sigma_tilde - 0.93911).abs() < 1e-11);
        assert_eq!(m.df, Expr::Const(1.0));
    }

    #[test]
    fn rejects_a1() {
        let e = build_model(&cfg("n=3\nf=sigma-1\ng=sigma-0.5\nsigma_bar=1")).unwrap_err();
        assert!(matches!(e, Error::Assumption { condition: "(A1)", .. }), "{e}");
    }

    #[test]
    fn rejects_a3() {
        let e = build_model(&cfg("n=3\nf=sigma\ng=sigma-0.93911\nsigma_bar=0.5\nsigma_tilde=0.93911")).unwrap_err();
        assert!(matches!(e, Error::Assumption { condition: "(A3)", .. }), "{e}");
        let e = build_model(&cfg("n=3\nf=sigma\ng=sigma-0.93911\nsigma_bar=0.5")).unwrap_err();
        assert!(matches!(e, Error::Assumption { condition: "(A3)", .. }), "{e}");
    }

    #[test]
    fn rejects_decreasing_g() {
        let e = build_model(&cfg("n=3\nf=sigma\ng=0.5-sigma\nsigma_bar=1\nsigma_tilde=0.5")).unwrap_err();
        assert!(matches!(e, Error::Assumption { condition: "(A2)", .. }), "{e}");
    }

    #[test]
    fn rejects_wrong_sigma_tilde() {
        let e = build_model(&cfg("n=3\nf=sigma\ng=sigma-0.5\nsigma_bar=1\nsigma_tilde=0.4")).unwrap_err();
        assert!(matches!(e, Error::Assumption { condition: "(A2)", .. }), "{e}");
    }

    #[test]
    fn missing_key() {
        assert!(matches!(build_model(&cfg("n=3\nf=sigma\nsigma_bar=1")), Err(Error::Config(_))));
    }

    #[test]
    fn rescaling_scales_sources() {
        let m = reference_model(0.0, 2.0).rescaled(2.0);
        assert_eq!(m.f_at(0.5).unwrap(), 2.0);
        assert_eq!(m.df_at(0.5).unwrap(), 4.0);
        assert_eq!(m.gamma, 1.0);
    }
}
