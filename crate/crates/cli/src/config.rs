//! Experiment configuration: defaults, overridden by a flat key=value file,
//! then by `PRIVDDC_*` environment variables, then by command-line flags of
//! the same names.

use std::collections::BTreeMap;
use std::fs;
use std::path::PathBuf;

use privddc::{Error, Result};

/// Environment variable prefix; `input-range` becomes `PRIVDDC_INPUT_RANGE`.
pub const ENV_PREFIX: &str = "PRIVDDC_";

/// All recognized configuration keys.
pub const KEYS: [&str; 16] = [
    "plant",
    "out",
    "seed",
    "horizon",
    "input-range",
    "x0-range",
    "key-range",
    "rho",
    "b-norm-bound",
    "d-max-grid",
    "trials",
    "beta",
    "delta-alpha",
    "t-inj",
    "t-a",
    "t-end",
];

/// Fully resolved experiment parameters.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    /// "batch-reactor" or a directory containing `A.csv` and `B.csv`.
    pub plant: String,
    /// Output directory.
    pub out: PathBuf,
    /// Master seed; per-trial and per-purpose streams derive from it.
    pub seed: u64,
    /// Data-collection horizon T.
    pub horizon: usize,
    pub input_range: (f64, f64),
    pub x0_range: (f64, f64),
    pub key_range: (f64, f64),
    /// Stage-2 fill factor in (0, 1].
    pub rho: f64,
    /// Known bound on the input-matrix norm; the true norm when absent.
    pub b_norm_bound: Option<f64>,
    /// Disturbance amplitudes swept by the `sweep` command.
    pub d_max_grid: Vec<f64>,
    /// Trials per grid point.
    pub trials: usize,
    pub beta: f64,
    pub delta_alpha: f64,
    pub t_inj: usize,
    pub t_a: usize,
    pub t_end: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            plant: "batch-reactor".into(),
            out: PathBuf::from("runs/out"),
            seed: 1,
            horizon: 20,
            input_range: (-5.0, 5.0),
            x0_range: (-2.5, 2.5),
            key_range: (-1.0, 1.0),
            rho: 0.9,
            b_norm_bound: None,
            d_max_grid: (0..9).map(|i| 0.02 * i as f64).collect(),
            trials: 100,
            beta: 0.5,
            delta_alpha: 0.2,
            t_inj: 10,
            t_a: 400,
            t_end: 500,
        }
    }
}

fn parse_range(key: &str, value: &str) -> Result<(f64, f64)> {
    let parts: Vec<&str> = value.split(',').map(str::trim).collect();
    if parts.len() != 2 {
        return Err(Error::Parse(format!("{key} expects \"lo,hi\", got {value:?}")));
    }
    let lo: f64 = parts[0]
        .parse()
        .map_err(|_| Error::Parse(format!("bad number {:?} in {key}", parts[0])))?;
    let hi: f64 = parts[1]
        .parse()
        .map_err(|_| Error::Parse(format!("bad number {:?} in {key}", parts[1])))?;
    if !(lo < hi) {
        return Err(Error::Parse(format!("{key} needs lo < hi, got {value:?}")));
    }
    Ok((lo, hi))
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse::<T>()
        .map_err(|_| Error::Parse(format!("bad value {value:?} for {key}")))
}

impl ExperimentConfig {
    /// Apply one key=value override.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "plant" => self.plant = value.trim().to_string(),
            "out" => self.out = PathBuf::from(value.trim()),
            "seed" => self.seed = parse_num(key, value)?,
            "horizon" => self.horizon = parse_num(key, value)?,
            "input-range" => self.input_range = parse_range(key, value)?,
            "x0-range" => self.x0_range = parse_range(key, value)?,
            "key-range" => self.key_range = parse_range(key, value)?,
            "rho" => self.rho = parse_num(key, value)?,
            "b-norm-bound" => self.b_norm_bound = Some(parse_num(key, value)?),
            "d-max-grid" => {
                let grid: Result<Vec<f64>> = value
                    .split(',')
                    .map(|s| parse_num::<f64>(key, s))
                    .collect();
                let grid = grid?;
                if grid.is_empty() {
                    return Err(Error::Parse("d-max-grid must be nonempty".into()));
                }
                self.d_max_grid = grid;
            }
            "trials" => {
                self.trials = parse_num(key, value)?;
                if self.trials == 0 {
                    return Err(Error::Parse("trials must be >= 1".into()));
                }
            }
            "beta" => self.beta = parse_num(key, value)?,
            "delta-alpha" => self.delta_alpha = parse_num(key, value)?,
            "t-inj" => self.t_inj = parse_num(key, value)?,
            "t-a" => self.t_a = parse_num(key, value)?,
            "t-end" => self.t_end = parse_num(key, value)?,
            other => return Err(Error::Parse(format!("unknown configuration key {other:?}"))),
        }
        Ok(())
    }

    /// Read a flat key=value file (blank lines and `#` comments ignored).
    pub fn apply_file(&mut self, path: &std::path::Path) -> Result<()> {
        let text = fs::read_to_string(path)?;
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Parse(format!("{}:{}: expected key=value", path.display(), i + 1))
            })?;
            self.set(key.trim(), value.trim())?;
        }
        Ok(())
    }

    /// Apply any `PRIVDDC_*` environment variables.
    pub fn apply_env(&mut self) -> Result<()> {
        for key in KEYS {
            let env_key = format!("{ENV_PREFIX}{}", key.replace('-', "_").to_uppercase());
            if let Ok(value) = std::env::var(&env_key) {
                self.set(key, &value)?;
            }
        }
        Ok(())
    }

    /// Resolve precedence: defaults, file (if given), environment, flags.
    pub fn resolve(
        config_file: Option<&std::path::Path>,
        flags: &BTreeMap<String, String>,
    ) -> Result<Self> {
        let mut cfg = Self::default();
        if let Some(path) = config_file {
            cfg.apply_file(path)?;
        }
        cfg.apply_env()?;
        for (key, value) in flags {
            cfg.set(key, value)?;
        }
        Ok(cfg)
    }
}
