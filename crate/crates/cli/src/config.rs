//! Flat `key = value` run configuration.
//!
//! Blank lines and lines starting with `#` are ignored. Every key is
//! optional; unknown or repeated keys are rejected with the offending line.
//!
//! | key               | default     | meaning                                          |
//! |-------------------|-------------|--------------------------------------------------|
//! | `pulse`           | `sech`      | `sech`, `zero`, `reference` or `sampled`         |
//! | `pulse_table`     |             | knot table (`t,g`) for `pulse = sampled`         |
//! | `t_start`/`t_end` | `-15`/`15`  | integration window (widened for long pulses)     |
//! | `sample_step`     | `0.1`       | time step of trajectory/master tables (`0`: integrator steps) |
//! | `rel_tol`         | `1e-9`      | integrator relative tolerance                    |
//! | `abs_tol`         | `1e-11`     | integrator absolute tolerance                    |
//! | `noise`           | `amplitude1`| comma list of `amplitude1`, `amplitude2`, `timing2` |
//! | `epsilon`         | `0.01`      | noise variance scale, shared by all models       |
//! | `n`               | `3`         | knot count of optimized pulses                   |
//! | `end_time`        | `10`        | pulse end time `T` for `optimize`                |
//! | `end_times`       | `2,4,6,8,10`| comma list of `T` for `sweep`                    |
//! | `objective`       | `amplitude` | noise kind optimized against                     |
//! | `g_max`           | `20`        | upper bound on free knot values                  |
//! | `max_evaluations` | `4000`      | Nelder–Mead evaluation budget                    |
//! | `x_tol`/`f_tol`   | `1e-4`/`1e-7` | simplex convergence tolerances                 |
//! | `initial_spread`  | `0.1`       | relative size of the initial simplex             |
//! | `seed`            | `0`         | seed for the simplex perturbation signs          |
//! | `sweep_table`     |             | `T,eta_final` table consumed by `fit`            |
//! | `output_dir`      | `out`       | where results are written                        |
//! | `formats`         | `csv,json`  | which of `csv` and `json` to emit                |

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use cascade_core::dynamics::IntegratorConfig;
use cascade_core::hilbert::Cavity;
use cascade_core::pulses::NoiseKind;
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{file}:{line}: {message}")]
    Line { file: String, line: usize, message: String },
    #[error("key `{key}`: {message}")]
    Key { key: String, message: String },
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PulseChoice {
    Sech,
    Zero,
    Reference,
    Sampled,
}

impl FromStr for PulseChoice {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "sech" => Ok(Self::Sech),
            "zero" => Ok(Self::Zero),
            "reference" => Ok(Self::Reference),
            "sampled" => Ok(Self::Sampled),
            _ => Err(format!("unknown pulse `{s}` (expected sech, zero, reference or sampled)")),
        }
    }
}

impl fmt::Display for PulseChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Sech => "sech",
            Self::Zero => "zero",
            Self::Reference => "reference",
            Self::Sampled => "sampled",
        })
    }
}

/// One noise model: kind and perturbed pulse.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NoiseSpec {
    pub kind: NoiseKind,
    pub target: Cavity,
}

impl FromStr for NoiseSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let (kind, target) = s.split_at(s.len().saturating_sub(1));
        let kind: NoiseKind = kind.parse().map_err(|_| format!("unknown noise model `{s}`"))?;
        let target = match target {
            "1" => Cavity::Left,
            "2" => Cavity::Right,
            _ => return Err(format!("noise model `{s}` must end in 1 or 2")),
        };
        if kind == NoiseKind::Timing && target == Cavity::Left {
            return Err("timing noise is only defined on pulse 2".into());
        }
        Ok(Self { kind, target })
    }
}

impl fmt::Display for NoiseSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.kind, self.target.number())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub pulse: PulseChoice,
    pub pulse_table: Option<PathBuf>,
    pub t_start: f64,
    pub t_end: f64,
    pub sample_step: f64,
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub noise: Vec<NoiseSpec>,
    pub epsilon: f64,
    pub n: usize,
    pub end_time: f64,
    pub end_times: Vec<f64>,
    pub objective: NoiseKind,
    pub g_max: f64,
    pub max_evaluations: usize,
    pub x_tol: f64,
    pub f_tol: f64,
    pub initial_spread: f64,
    pub seed: u64,
    pub sweep_table: Option<PathBuf>,
    pub output_dir: PathBuf,
    pub csv: bool,
    pub json: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        let integ = IntegratorConfig::default();
        Self {
            pulse: PulseChoice::Sech,
            pulse_table: None,
            t_start: integ.t_start,
            t_end: integ.t_end,
            sample_step: 0.1,
            rel_tol: integ.rel_tol,
            abs_tol: integ.abs_tol,
            noise: vec![NoiseSpec { kind: NoiseKind::Amplitude, target: Cavity::Left }],
            epsilon: 0.01,
            n: 3,
            end_time: 10.0,
            end_times: vec![2.0, 4.0, 6.0, 8.0, 10.0],
            objective: NoiseKind::Amplitude,
            g_max: 20.0,
            max_evaluations: 4000,
            x_tol: 1e-4,
            f_tol: 1e-7,
            initial_spread: 0.1,
            seed: 0,
            sweep_table: None,
            output_dir: PathBuf::from("out"),
            csv: true,
            json: true,
        }
    }
}

fn parse_list<T: FromStr>(value: &str) -> Result<Vec<T>, String>
where
    T::Err: fmt::Display,
{
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<T>().map_err(|e| format!("`{s}`: {e}")))
        .collect()
}

fn parse_one<T: FromStr>(value: &str) -> Result<T, String>
where
    T::Err: fmt::Display,
{
    value.parse::<T>().map_err(|e| format!("`{value}`: {e}"))
}

impl RunConfig {
    /// Applies one `key = value` assignment. Relative paths resolve against `base`.
    pub fn set(&mut self, key: &str, value: &str, base: &Path) -> Result<(), String> {
        let path = |v: &str| -> PathBuf {
            let p = PathBuf::from(v);
            if p.is_absolute() {
                p
            } else {
                base.join(p)
            }
        };
        match key {
            "pulse" => self.pulse = parse_one(value)?,
            "pulse_table" => self.pulse_table = Some(path(value)),
            "t_start" => self.t_start = parse_one(value)?,
            "t_end" => self.t_end = parse_one(value)?,
            "sample_step" => self.sample_step = parse_one(value)?,
            "rel_tol" => self.rel_tol = parse_one(value)?,
            "abs_tol" => self.abs_tol = parse_one(value)?,
            "noise" => self.noise = parse_list(value)?,
            "epsilon" => self.epsilon = parse_one(value)?,
            "n" => self.n = parse_one(value)?,
            "end_time" => self.end_time = parse_one(value)?,
            "end_times" => self.end_times = parse_list(value)?,
            "objective" => self.objective = parse_one(value)?,
            "g_max" => self.g_max = parse_one(value)?,
            "max_evaluations" => self.max_evaluations = parse_one(value)?,
            "x_tol" => self.x_tol = parse_one(value)?,
            "f_tol" => self.f_tol = parse_one(value)?,
            "initial_spread" => self.initial_spread = parse_one(value)?,
            "seed" => self.seed = parse_one(value)?,
            "sweep_table" => self.sweep_table = Some(path(value)),
            "output_dir" => self.output_dir = path(value),
            "formats" => {
                let formats: Vec<String> = parse_list(value)?;
                self.csv = false;
                self.json = false;
                for f in formats {
                    match f.as_str() {
                        "csv" => self.csv = true,
                        "json" => self.json = true,
                        other => return Err(format!("unknown format `{other}` (expected csv or json)")),
                    }
                }
            }
            _ => return Err(format!("unknown key `{key}`")),
        }
        Ok(())
    }

    pub fn parse(text: &str, file: &str, base: &Path) -> Result<Self, ConfigError> {
        let mut cfg = Self::default();
        let mut seen = BTreeMap::new();
        for (k, raw) in text.lines().enumerate() {
            let line = k + 1;
            let trimmed = raw.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let err = |message: String| ConfigError::Line { file: file.to_string(), line, message };
            let (key, value) =
                trimmed.split_once('=').ok_or_else(|| err(format!("expected `key = value`, found `{trimmed}`")))?;
            let (key, value) = (key.trim(), value.trim());
            if let Some(first) = seen.insert(key.to_string(), line) {
                return Err(err(format!("key `{key}` already set on line {first}")));
            }
            cfg.set(key, value, base).map_err(err)?;
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| ConfigError::Io { path: path.display().to_string(), source })?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, &path.display().to_string(), base)
    }

    /// Cross-field checks and existence of referenced files.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let key = |k: &str, m: String| ConfigError::Key { key: k.to_string(), message: m };
        if self.pulse == PulseChoice::Sampled && self.pulse_table.is_none() {
            return Err(key("pulse_table", "required when pulse = sampled".into()));
        }
        for (name, p) in [("pulse_table", &self.pulse_table), ("sweep_table", &self.sweep_table)] {
            if let Some(p) = p {
                if !p.is_file() {
                    return Err(key(name, format!("{} does not exist", p.display())));
                }
            }
        }
        if !(self.t_end > self.t_start) {
            return Err(key("t_end", format!("must exceed t_start ({} <= {})", self.t_end, self.t_start)));
        }
        if !(self.rel_tol > 0.0 && self.abs_tol > 0.0) {
            return Err(key("rel_tol", "tolerances must be positive".into()));
        }
        if !(self.sample_step >= 0.0 && self.sample_step.is_finite()) {
            return Err(key("sample_step", format!("must be >= 0, got {}", self.sample_step)));
        }
        if !self.epsilon.is_finite() || self.epsilon < 0.0 {
            return Err(key("epsilon", format!("must be >= 0, got {}", self.epsilon)));
        }
        if self.noise.is_empty() {
            return Err(key("noise", "at least one noise model is required".into()));
        }
        if self.end_times.is_empty() {
            return Err(key("end_times", "at least one end time is required".into()));
        }
        if !self.csv && !self.json {
            return Err(key("formats", "at least one output format is required".into()));
        }
        Ok(())
    }

    pub fn integrator(&self) -> IntegratorConfig {
        IntegratorConfig::default().with_window(self.t_start, self.t_end).with_tolerances(self.rel_tol, self.abs_tol)
    }

    /// Canonical `key = value` listing of every setting except the output
    /// location, used for the config hash.
    pub fn canonical(&self) -> String {
        let list = |v: &[f64]| v.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(",");
        let noise = self.noise.iter().map(ToString::to_string).collect::<Vec<_>>().join(",");
        let path = |p: &Option<PathBuf>| p.as_ref().map(|p| p.display().to_string()).unwrap_or_default();
        let mut formats = Vec::new();
        if self.csv {
            formats.push("csv");
        }
        if self.json {
            formats.push("json");
        }
        let entries = [
            ("abs_tol", format!("{:?}", self.abs_tol)),
            ("end_time", format!("{:?}", self.end_time)),
            ("end_times", list(&self.end_times)),
            ("epsilon", format!("{:?}", self.epsilon)),
            ("f_tol", format!("{:?}", self.f_tol)),
            ("formats", formats.join(",")),
            ("g_max", format!("{:?}", self.g_max)),
            ("initial_spread", format!("{:?}", self.initial_spread)),
            ("max_evaluations", self.max_evaluations.to_string()),
            ("n", self.n.to_string()),
            ("noise", noise),
            ("objective", self.objective.to_string()),
            ("pulse", self.pulse.to_string()),
            ("pulse_table", path(&self.pulse_table)),
            ("rel_tol", format!("{:?}", self.rel_tol)),
            ("sample_step", format!("{:?}", self.sample_step)),
            ("seed", self.seed.to_string()),
            ("sweep_table", path(&self.sweep_table)),
            ("t_end", format!("{:?}", self.t_end)),
            ("t_start", format!("{:?}", self.t_start)),
            ("x_tol", format!("{:?}", self.x_tol)),
        ];
        entries.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }

    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.canonical().as_bytes()))
    }
}
