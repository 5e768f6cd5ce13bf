use std::fs;
use std::path::PathBuf;

use clap::Args;
use fbstab::config::{ConfigMap, RunConfig};
use fbstab::model::reference_sigma_tilde;
use fbstab::{build_model, Error, Result, TumorModel};

/// Options shared by every model-driven subcommand. Each value flag mirrors
/// the config key of the same name and overrides it.
#[derive(Debug, Clone, Default, Args)]
pub struct Common {
    /// Config file with `key = value` lines.
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Start from the reference model (n = 3, f = sigma, g = sigma - 3(coth 1 - 1), sigma_bar = 1).
    #[arg(long)]
    pub reference: bool,
    /// Extra `key=value` override; may be repeated.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    #[arg(long, value_name = "DIR")]
    pub out_dir: Option<String>,
    /// csv, json or both.
    #[arg(long)]
    pub format: Option<String>,
    #[arg(long)]
    pub grid_n: Option<String>,
    #[arg(long)]
    pub k_max: Option<String>,
    #[arg(long)]
    pub gamma: Option<String>,
    /// Use `gamma = factor * gamma_star` in the unit frame.
    #[arg(long)]
    pub gamma_factor: Option<String>,
    #[arg(long)]
    pub c: Option<String>,
    #[arg(long)]
    pub c_list: Option<String>,
    #[arg(long)]
    pub modes: Option<String>,
    #[arg(long)]
    pub k: Option<String>,
    #[arg(long)]
    pub dt: Option<String>,
    #[arg(long)]
    pub t_end: Option<String>,
    #[arg(long)]
    pub stride: Option<String>,
    /// Initial radius as a multiple of the stationary radius.
    #[arg(long)]
    pub r0: Option<String>,
    /// backward_euler or trapezoidal.
    #[arg(long)]
    pub scheme: Option<String>,
    #[arg(long)]
    pub quasi_static: bool,
    /// Comma-separated translation vector.
    #[arg(long, allow_hyphen_values = true)]
    pub shift: Option<String>,
    #[arg(long, value_name = "PATH")]
    pub input: Option<String>,
}

/// Keys filled in by `--reference`.
pub fn reference_keys() -> Vec<(&'static str, String)> {
    vec![
        ("n", "3".into()),
        ("f", "sigma".into()),
        ("g", format!("sigma - {:?}", reference_sigma_tilde())),
        ("sigma_bar", "1".into()),
        ("sigma_tilde", format!("{:?}", reference_sigma_tilde())),
    ]
}

impl Common {
    fn flag_overrides(&self) -> Vec<(&'static str, &str)> {
        let pairs: [(&'static str, &Option<String>); 17] = [
            ("out_dir", &self.out_dir),
            ("format", &self.format),
            ("grid_n", &self.grid_n),
            ("k_max", &self.k_max),
            ("gamma", &self.gamma),
            ("gamma_factor", &self.gamma_factor),
            ("c", &self.c),
            ("c_list", &self.c_list),
            ("modes", &self.modes),
            ("k", &self.k),
            ("dt", &self.dt),
            ("t_end", &self.t_end),
            ("stride", &self.stride),
            ("r0", &self.r0),
            ("scheme", &self.scheme),
            ("shift", &self.shift),
            ("input", &self.input),
        ];
        let mut out: Vec<(&'static str, &str)> =
            pairs.iter().filter_map(|(k, v)| v.as_deref().map(|v| (*k, v))).collect();
        if self.quasi_static {
            out.push(("quasi_static", "true"));
        }
        out
    }

    /// Layered key map: reference model, then the config file, then
    /// `--set`, then the typed flags.
    pub fn map(&self) -> Result<ConfigMap> {
        let mut map = ConfigMap::new();
        if self.reference {
            for (k, v) in reference_keys() {
                map.set(k, v);
            }
        }
        if let Some(path) = &self.config {
            let text =
                fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
            let file = ConfigMap::parse(&text)?;
            for key in file.keys() {
                map.set(key, file.get(key).unwrap_or_default());
            }
        }
        for item in &self.set {
            let (k, v) = item
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("`--set {item}` is not of the form key=value")))?;
            map.set(k.trim(), v.trim());
        }
        for (k, v) in self.flag_overrides() {
            map.set(k, v);
        }
        Ok(map)
    }
}

pub struct Settings {
    pub map: ConfigMap,
    pub run: RunConfig,
}

impl Settings {
    pub fn load(common: &Common) -> Result<Self> {
        let map = common.map()?;
        let run = RunConfig::from_map(&map)?;
        Ok(Settings { map, run })
    }

    pub fn model(&self) -> Result<TumorModel> {
        build_model(&self.map)
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.run.out_dir.join(name)
    }
}
