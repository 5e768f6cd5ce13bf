//! `key = value` configuration files and the numeric run controls.

use std::collections::BTreeMap;
use std::path::PathBuf;

use crate::error::{Error, Result};

/// Parsed `key = value` pairs. Later [`ConfigMap::set`] calls override
/// values read from a file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConfigMap {
    entries: BTreeMap<String, String>,
}

impl ConfigMap {
    pub fn new() -> Self {
        Self::default()
    }

    /// Parse UTF-8 text with one `key = value` per line. `#` starts a
    /// comment; blank lines are ignored; duplicate keys are an error.
    pub fn parse(text: &str) -> Result<Self> {
        let mut map = ConfigMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = match raw.find('#') {
                Some(i) => &raw[..i],
                None => raw,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(Error::Config(format!("line {}: expected `key = value`", lineno + 1)));
            };
            let key = k.trim();
            if key.is_empty() {
                return Err(Error::Config(format!("line {}: empty key", lineno + 1)));
            }
            if map.entries.insert(key.to_string(), v.trim().to_string()).is_some() {
                return Err(Error::Config(format!("line {}: duplicate key `{key}`", lineno + 1)));
            }
        }
        Ok(map)
    }

    pub fn set(&mut self, key: &str, value: impl Into<String>) {
        self.entries.insert(key.to_string(), value.into());
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn contains(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn require(&self, key: &str) -> Result<&str> {
        self.get(key).ok_or_else(|| Error::Config(format!("missing required key `{key}`")))
    }

    pub fn get_f64(&self, key: &str) -> Result<Option<f64>> {
        self.get(key)
            .map(|v| {
                v.parse::<f64>()
                    .ok()
                    .filter(|x| x.is_finite())
                    .ok_or_else(|| Error::Config(format!("`{key}`: `{v}` is not a finite number")))
            })
            .transpose()
    }

    pub fn get_usize(&self, key: &str) -> Result<Option<usize>> {
        self.get(key)
            .map(|v| {
                v.parse::<usize>()
                    .map_err(|_| Error::Config(format!("`{key}`: `{v}` is not a non-negative integer")))
            })
            .transpose()
    }

    pub fn get_bool(&self, key: &str) -> Result<Option<bool>> {
        self.get(key)
            .map(|v| match v {
                "true" | "yes" | "1" => Ok(true),
                "false" | "no" | "0" => Ok(false),
                _ => Err(Error::Config(format!("`{key}`: `{v}` is not a boolean"))),
            })
            .transpose()
    }

    /// Comma separated list of numbers.
    pub fn get_f64_list(&self, key: &str) -> Result<Option<Vec<f64>>> {
        self.get(key)
            .map(|v| {
                v.split(',')
                    .map(|s| {
                        let s = s.trim();
                        s.parse::<f64>()
                            .ok()
                            .filter(|x| x.is_finite())
                            .ok_or_else(|| Error::Config(format!("`{key}`: `{s}` is not a finite number")))
                    })
                    .collect()
            })
            .transpose()
    }

    pub fn get_usize_list(&self, key: &str) -> Result<Option<Vec<usize>>> {
        self.get(key)
            .map(|v| {
                v.split(',')
                    .map(|s| {
                        let s = s.trim();
                        s.parse::<usize>()
                            .map_err(|_| Error::Config(format!("`{key}`: `{s}` is not a non-negative integer")))
                    })
                    .collect()
            })
            .transpose()
    }

    pub fn require_f64(&self, key: &str) -> Result<f64> {
        self.get_f64(key)?
            .ok_or_else(|| Error::Config(format!("missing required key `{key}`")))
    }

    pub fn require_usize(&self, key: &str) -> Result<usize> {
        self.get_usize(key)?
            .ok_or_else(|| Error::Config(format!("missing required key `{key}`")))
    }
}

/// Time integrator for the linear mode dynamics.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TimeScheme {
    BackwardEuler,
    Trapezoidal,
}

impl std::str::FromStr for TimeScheme {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "backward_euler" | "be" => Ok(TimeScheme::BackwardEuler),
            "trapezoidal" | "cn" => Ok(TimeScheme::Trapezoidal),
            _ => Err(Error::Config(format!("unknown time scheme `{s}`"))),
        }
    }
}

pub const MODEL_KEYS: [&str; 7] = ["n", "f", "g", "sigma_bar", "sigma_tilde", "c", "gamma"];

pub const CONTROL_KEYS: [&str; 29] = [
    "grid_n",
    "stationary_steps",
    "k_max",
    "tol",
    "eig_tol",
    "max_iter",
    "dt",
    "t_end",
    "stride",
    "rate_window",
    "r0",
    "k",
    "modes",
    "gamma_factor",
    "c_list",
    "seed",
    "delta",
    "epsilon",
    "sh_k_max",
    "strict",
    "scheme",
    "quasi_static",
    "out_dir",
    "format",
    "conv_tol",
    "shift",
    "input",
    "theta0",
    "slice_r0",
];

/// Numeric controls and selectors shared by the front end.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub grid_n: usize,
    pub stationary_steps: usize,
    pub k_max: usize,
    pub tol: f64,
    pub eig_tol: f64,
    pub max_iter: usize,
    pub dt: Option<f64>,
    pub t_end: Option<f64>,
    pub stride: usize,
    pub rate_window: f64,
    /// Initial radius as a multiple of the stationary radius.
    pub r0: f64,
    pub k: usize,
    pub modes: Vec<usize>,
    /// When set, `gamma = gamma_factor * gamma_star` in the unit frame.
    pub gamma_factor: Option<f64>,
    pub c_list: Vec<f64>,
    pub seed: u64,
    pub delta: f64,
    pub epsilon: f64,
    pub sh_k_max: usize,
    pub strict: bool,
    pub scheme: TimeScheme,
    pub quasi_static: bool,
    pub out_dir: PathBuf,
    pub format: OutputFormat,
    /// `|R - R_s| / R_s` below which a radial run counts as converged.
    pub conv_tol: f64,
    /// Translation vector for `translate`.
    pub shift: Vec<f64>,
    /// Coefficient CSV `k,l,b_kl` for `translate`.
    pub input: Option<PathBuf>,
    pub theta0: f64,
    pub slice_r0: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Json,
    Both,
}

impl OutputFormat {
    pub fn csv(self) -> bool {
        matches!(self, OutputFormat::Csv | OutputFormat::Both)
    }
    pub fn json(self) -> bool {
        matches!(self, OutputFormat::Json | OutputFormat::Both)
    }
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            grid_n: 2048,
            stationary_steps: 4096,
            k_max: 64,
            tol: 1e-10,
            eig_tol: 1e-13,
            max_iter: 200,
            dt: None,
            t_end: None,
            stride: 1,
            rate_window: 0.5,
            r0: 1.1,
            k: 2,
            modes: vec![0, 2, 3],
            gamma_factor: None,
            c_list: vec![1e-3],
            seed: 0,
            delta: 0.1,
            epsilon: 0.05,
            sh_k_max: 16,
            strict: false,
            scheme: TimeScheme::BackwardEuler,
            quasi_static: false,
            out_dir: PathBuf::from("."),
            format: OutputFormat::Both,
            conv_tol: 1e-4,
            shift: vec![0.02, 0.0, 0.0],
            input: None,
            theta0: 0.7,
            slice_r0: 1.3,
        }
    }
}

impl RunConfig {
    /// Read the control keys from `map`; unknown keys are rejected.
    pub fn from_map(map: &ConfigMap) -> Result<Self> {
        for key in map.keys() {
            if !MODEL_KEYS.contains(&key) && !CONTROL_KEYS.contains(&key) {
                return Err(Error::Config(format!("unknown key `{key}`")));
            }
        }
        let d = RunConfig::default();
        let cfg = RunConfig {
            grid_n: map.get_usize("grid_n")?.unwrap_or(d.grid_n),
            stationary_steps: map.get_usize("stationary_steps")?.unwrap_or(d.stationary_steps),
            k_max: map.get_usize("k_max")?.unwrap_or(d.k_max),
            tol: map.get_f64("tol")?.unwrap_or(d.tol),
            eig_tol: map.get_f64("eig_tol")?.unwrap_or(d.eig_tol),
            max_iter: map.get_usize("max_iter")?.unwrap_or(d.max_iter),
            dt: map.get_f64("dt")?,
            t_end: map.get_f64("t_end")?,
            stride: map.get_usize("stride")?.unwrap_or(d.stride),
            rate_window: map.get_f64("rate_window")?.unwrap_or(d.rate_window),
            r0: map.get_f64("r0")?.unwrap_or(d.r0),
            k: map.get_usize("k")?.unwrap_or(d.k),
            modes: map.get_usize_list("modes")?.unwrap_or(d.modes),
            gamma_factor: map.get_f64("gamma_factor")?,
            c_list: map.get_f64_list("c_list")?.unwrap_or(d.c_list),
            seed: map.get_usize("seed")?.map(|s| s as u64).unwrap_or(d.seed),
            delta: map.get_f64("delta")?.unwrap_or(d.delta),
            epsilon: map.get_f64("epsilon")?.unwrap_or(d.epsilon),
            sh_k_max: map.get_usize("sh_k_max")?.unwrap_or(d.sh_k_max),
            strict: map.get_bool("strict")?.unwrap_or(d.strict),
            scheme: match map.get("scheme") {
                Some(s) => s.parse()?,
                None => d.scheme,
            },
            quasi_static: map.get_bool("quasi_static")?.unwrap_or(d.quasi_static),
            out_dir: map.get("out_dir").map(PathBuf::from).unwrap_or(d.out_dir),
            format: match map.get("format") {
                None => d.format,
                Some("csv") => OutputFormat::Csv,
                Some("json") => OutputFormat::Json,
                Some("both") => OutputFormat::Both,
                Some(other) => return Err(Error::Config(format!("unknown format `{other}`"))),
            },
            conv_tol: map.get_f64("conv_tol")?.unwrap_or(d.conv_tol),
            shift: map.get_f64_list("shift")?.unwrap_or(d.shift),
            input: map.get("input").map(PathBuf::from),
            theta0: map.get_f64("theta0")?.unwrap_or(d.theta0),
            slice_r0: map.get_f64("slice_r0")?.unwrap_or(d.slice_r0),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(64..=8192).contains(&self.grid_n) || !self.grid_n.is_power_of_two() {
            return Err(Error::Config(format!(
                "grid_n = {} must be a power of two between 64 and 8192",
                self.grid_n
            )));
        }
        if self.stationary_steps < 8 || !self.stationary_steps.is_multiple_of(2) {
            return Err(Error::Config("stationary_steps must be an even number >= 8".into()));
        }
        for (name, v) in [("tol", self.tol), ("eig_tol", self.eig_tol), ("conv_tol", self.conv_tol)] {
            if !(v > 0.0) {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        if let Some(dt) = self.dt {
            if !(dt > 0.0) {
                return Err(Error::Config("dt must be positive".into()));
            }
        }
        if let Some(t) = self.t_end {
            if !(t >= 0.0) {
                return Err(Error::Config("t_end must be non-negative".into()));
            }
        }
        if !(self.rate_window > 0.0 && self.rate_window <= 1.0) {
            return Err(Error::Config("rate_window must lie in (0, 1]".into()));
        }
        if !(self.r0 > 0.0) {
            return Err(Error::Config("r0 must be positive".into()));
        }
        if self.stride == 0 {
            return Err(Error::Config("stride must be at least 1".into()));
        }
        if self.k_max < 8 {
            return Err(Error::Config("k_max must be at least 8".into()));
        }
        if self.c_list.iter().any(|&c| !(c > 0.0)) {
            return Err(Error::Config("every entry of c_list must be positive".into()));
        }
        if !(self.delta > 0.0 && self.delta < 0.2) {
            return Err(Error::Config("delta must lie in (0, 0.2)".into()));
        }
        if !(self.epsilon > 0.0 && self.epsilon < self.delta) {
            return Err(Error::Config("epsilon must lie in (0, delta)".into()));
        }
        Ok(())
    }
}
