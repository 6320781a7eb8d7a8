//! Flat `key = value` run configuration shared by the command-line driver
//! and the test suites.
//!
//! The format is line-oriented: blank lines and `#` comments are ignored,
//! every other line must read `key = value`, keys are dotted
//! (`model.lambda`, `grid.intervals`, …) and may appear once. List-valued
//! sweep keys hold comma-separated numbers. Serialization writes keys in
//! sorted order with Rust's shortest round-trip float formatting, so a
//! parsed-and-reserialized file is byte-stable.

use crate::dynamics::{RunPlan, SchemeConfig};
use crate::error::ConfigError;
use crate::grid::Grid;
use crate::params::ModelParams;
use std::collections::BTreeMap;
use std::fmt::Write as _;

/// Parsed but untyped `key = value` pairs.
#[derive(Debug, Clone)]
pub struct RawConfig {
    entries: BTreeMap<String, String>,
}

impl RawConfig {
    /// Split a config text into pairs; rejects malformed lines and
    /// duplicate keys.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut entries = BTreeMap::new();
        for (idx, raw_line) in text.lines().enumerate() {
            let line = match raw_line.find('#') {
                Some(pos) => &raw_line[..pos],
                None => raw_line,
            };
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let Some(eq) = line.find('=') else {
                return Err(ConfigError::Malformed {
                    line: idx + 1,
                    text: raw_line.to_string(),
                });
            };
            let key = line[..eq].trim();
            let value = line[eq + 1..].trim();
            if key.is_empty() || value.is_empty() {
                return Err(ConfigError::Malformed {
                    line: idx + 1,
                    text: raw_line.to_string(),
                });
            }
            if entries.insert(key.to_string(), value.to_string()).is_some() {
                return Err(ConfigError::DuplicateKey(key.to_string()));
            }
        }
        Ok(Self { entries })
    }

    fn take(&mut self, key: &str) -> Option<String> {
        self.entries.remove(key)
    }

    fn require(&mut self, key: &str) -> Result<String, ConfigError> {
        self.take(key)
            .ok_or_else(|| ConfigError::MissingKey(key.to_string()))
    }

    fn parse_f64(key: &str, value: &str) -> Result<f64, ConfigError> {
        let parsed: f64 = value.parse().map_err(|_| ConfigError::BadValue {
            key: key.to_string(),
            value: value.to_string(),
            want: "number",
        })?;
        if !parsed.is_finite() {
            return Err(ConfigError::Invalid {
                key: key.to_string(),
                why: format!("value {parsed} is not finite"),
            });
        }
        Ok(parsed)
    }

    fn require_f64(&mut self, key: &str) -> Result<f64, ConfigError> {
        let value = self.require(key)?;
        Self::parse_f64(key, &value)
    }

    fn optional_f64(&mut self, key: &str, default: f64) -> Result<f64, ConfigError> {
        match self.take(key) {
            Some(value) => Self::parse_f64(key, &value),
            None => Ok(default),
        }
    }

    fn optional_usize(&mut self, key: &str, default: usize) -> Result<usize, ConfigError> {
        match self.take(key) {
            Some(value) => value.parse().map_err(|_| ConfigError::BadValue {
                key: key.to_string(),
                value,
                want: "unsigned integer",
            }),
            None => Ok(default),
        }
    }

    fn require_usize(&mut self, key: &str) -> Result<usize, ConfigError> {
        let value = self.require(key)?;
        value.parse().map_err(|_| ConfigError::BadValue {
            key: key.to_string(),
            value,
            want: "unsigned integer",
        })
    }

    fn optional_bool(&mut self, key: &str, default: bool) -> Result<bool, ConfigError> {
        match self.take(key).as_deref() {
            Some("true") => Ok(true),
            Some("false") => Ok(false),
            Some(other) => Err(ConfigError::BadValue {
                key: key.to_string(),
                value: other.to_string(),
                want: "bool (true or false)",
            }),
            None => Ok(default),
        }
    }

    fn require_f64_list(&mut self, key: &str) -> Result<Vec<f64>, ConfigError> {
        let value = self.require(key)?;
        let mut out = Vec::new();
        for part in value.split(',') {
            let part = part.trim();
            if part.is_empty() {
                return Err(ConfigError::BadValue {
                    key: key.to_string(),
                    value,
                    want: "comma-separated numbers",
                });
            }
            out.push(Self::parse_f64(key, part)?);
        }
        Ok(out)
    }

    /// Errors on the first leftover (unrecognized) key.
    fn finish(self) -> Result<(), ConfigError> {
        match self.entries.into_keys().next() {
            Some(key) => Err(ConfigError::UnknownKey(key)),
            None => Ok(()),
        }
    }
}

/// Initial-data family of a run.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialData {
    /// A·exp(−(x−x₀)²/(2w²))·exp(icx²).
    Gaussian {
        amplitude: f64,
        center: f64,
        width: f64,
        chirp: f64,
    },
    /// Node values from a field CSV (grid must match the configured one).
    Csv { path: String },
}

/// A fully specified single run.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub params: ModelParams,
    pub grid: Grid,
    pub scheme: SchemeConfig,
    pub initial: InitialData,
    pub plan: RunPlan,
    /// Output directory; the command line may override it.
    pub output_dir: Option<String>,
}

fn invalid(key: &str, err: impl std::fmt::Display) -> ConfigError {
    ConfigError::Invalid {
        key: key.to_string(),
        why: err.to_string(),
    }
}

fn parse_scheme(raw: &mut RawConfig) -> Result<SchemeConfig, ConfigError> {
    let dt0 = raw.require_f64("scheme.dt0")?;
    let defaults = SchemeConfig::default();
    Ok(SchemeConfig {
        dt0,
        nl_tol: raw.optional_f64("scheme.nl_tol", defaults.nl_tol)?,
        nl_max_iter: raw.optional_usize("scheme.nl_max_iter", defaults.nl_max_iter)?,
        adapt: raw.optional_bool("scheme.adapt", defaults.adapt)?,
        dt_min: raw.optional_f64("scheme.dt_min", defaults.dt_min)?,
        blowup_factor: raw.optional_f64("scheme.blowup_factor", defaults.blowup_factor)?,
        first_order: raw.optional_bool("scheme.first_order", defaults.first_order)?,
        forcing: None,
    })
}

fn parse_model(raw: &mut RawConfig) -> Result<ModelParams, ConfigError> {
    let lambda = raw.require_f64("model.lambda")?;
    let p = raw.require_f64("model.p")?;
    let k = raw.require_f64("model.k")?;
    let r = raw.require_f64("model.r")?;
    let a = raw.require_f64("model.a")?;
    let validation = raw.optional_bool("model.validation", false)?;
    if validation {
        ModelParams::validation(lambda, p, k, r, a).map_err(|e| invalid("model.*", e))
    } else {
        ModelParams::new(lambda, p, k, r, a).map_err(|e| invalid("model.*", e))
    }
}

fn parse_grid(raw: &mut RawConfig) -> Result<Grid, ConfigError> {
    let length = raw.require_f64("grid.length")?;
    let intervals = raw.require_usize("grid.intervals")?;
    Grid::new(length, intervals).map_err(|e| invalid("grid.*", e))
}

/// Parse a single-run configuration.
pub fn parse_run_config(text: &str) -> Result<RunConfig, ConfigError> {
    let mut raw = RawConfig::parse(text)?;
    let params = parse_model(&mut raw)?;
    let grid = parse_grid(&mut raw)?;
    let scheme = parse_scheme(&mut raw)?;

    let family = raw.require("initial.family")?;
    let initial = match family.as_str() {
        "gaussian" => InitialData::Gaussian {
            amplitude: raw.require_f64("initial.amplitude")?,
            center: raw.optional_f64("initial.center", 2.0)?,
            width: raw.optional_f64("initial.width", 1.0)?,
            chirp: raw.optional_f64("initial.chirp", 0.0)?,
        },
        "csv" => InitialData::Csv {
            path: raw.require("initial.csv_path")?,
        },
        other => {
            return Err(ConfigError::BadValue {
                key: "initial.family".to_string(),
                value: other.to_string(),
                want: "gaussian or csv",
            })
        }
    };

    let t_end = raw.require_f64("run.t_end")?;
    if t_end <= 0.0 {
        return Err(invalid("run.t_end", "must be positive"));
    }
    let sample_every = raw.optional_usize("run.sample_every", 10)?;
    let snapshot_every = raw.optional_usize("run.snapshot_every", 0)?;
    let plan = RunPlan {
        t_end,
        sample_every,
        snapshot_every: if snapshot_every == 0 {
            None
        } else {
            Some(snapshot_every)
        },
    };
    let output_dir = raw.take("output.dir");
    raw.finish()?;
    Ok(RunConfig {
        params,
        grid,
        scheme,
        initial,
        plan,
        output_dir,
    })
}

/// A parameter sweep: the Cartesian product of the listed values, each
/// cell run with the shared grid/scheme/time settings.
#[derive(Debug, Clone)]
pub struct SweepConfig {
    pub grid: Grid,
    pub scheme: SchemeConfig,
    pub r: Vec<f64>,
    pub p: Vec<f64>,
    pub a: Vec<f64>,
    pub lambda: Vec<f64>,
    pub amplitude: Vec<f64>,
    pub chirp: Vec<f64>,
    pub k: f64,
    pub center: f64,
    pub width: f64,
    pub t_end: f64,
    pub sample_every: usize,
    /// Rerun detected blow-ups refined (half step, double resolution) and
    /// require a consistent detection time.
    pub refine_detections: bool,
    pub output_dir: Option<String>,
}

/// Parse a sweep configuration.
pub fn parse_sweep_config(text: &str) -> Result<SweepConfig, ConfigError> {
    let mut raw = RawConfig::parse(text)?;
    let grid = parse_grid(&mut raw)?;
    let scheme = parse_scheme(&mut raw)?;
    let cfg = SweepConfig {
        grid,
        scheme,
        r: raw.require_f64_list("sweep.r")?,
        p: raw.require_f64_list("sweep.p")?,
        a: raw.require_f64_list("sweep.a")?,
        lambda: raw.require_f64_list("sweep.lambda")?,
        amplitude: raw.require_f64_list("sweep.amplitude")?,
        chirp: raw.require_f64_list("sweep.chirp")?,
        k: raw.optional_f64("sweep.k", 1.0)?,
        center: raw.optional_f64("sweep.center", 2.0)?,
        width: raw.optional_f64("sweep.width", 1.0)?,
        t_end: raw.require_f64("sweep.t_end")?,
        sample_every: raw.optional_usize("sweep.sample_every", 10)?,
        refine_detections: raw.optional_bool("sweep.refine", true)?,
        output_dir: raw.take("output.dir"),
    };
    if cfg.t_end <= 0.0 {
        return Err(invalid("sweep.t_end", "must be positive"));
    }
    raw.finish()?;
    Ok(cfg)
}

fn write_scheme(out: &mut String, scheme: &SchemeConfig) {
    let d = SchemeConfig::default();
    if scheme.adapt != d.adapt {
        let _ = writeln!(out, "scheme.adapt = {}", scheme.adapt);
    }
    if scheme.blowup_factor != d.blowup_factor {
        let _ = writeln!(out, "scheme.blowup_factor = {}", scheme.blowup_factor);
    }
    let _ = writeln!(out, "scheme.dt0 = {}", scheme.dt0);
    if scheme.dt_min != d.dt_min {
        let _ = writeln!(out, "scheme.dt_min = {}", scheme.dt_min);
    }
    if scheme.first_order != d.first_order {
        let _ = writeln!(out, "scheme.first_order = {}", scheme.first_order);
    }
    if scheme.nl_max_iter != d.nl_max_iter {
        let _ = writeln!(out, "scheme.nl_max_iter = {}", scheme.nl_max_iter);
    }
    if scheme.nl_tol != d.nl_tol {
        let _ = writeln!(out, "scheme.nl_tol = {}", scheme.nl_tol);
    }
}

impl RunConfig {
    /// Serialize with sorted keys and shortest round-trip floats;
    /// `parse_run_config(cfg.to_text())` reproduces the configuration and
    /// re-serializing reproduces the bytes.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "grid.intervals = {}", self.grid.intervals());
        let _ = writeln!(out, "grid.length = {}", self.grid.length());
        match &self.initial {
            InitialData::Gaussian {
                amplitude,
                center,
                width,
                chirp,
            } => {
                let _ = writeln!(out, "initial.amplitude = {amplitude}");
                let _ = writeln!(out, "initial.center = {center}");
                let _ = writeln!(out, "initial.chirp = {chirp}");
                let _ = writeln!(out, "initial.family = gaussian");
                let _ = writeln!(out, "initial.width = {width}");
            }
            InitialData::Csv { path } => {
                let _ = writeln!(out, "initial.csv_path = {path}");
                let _ = writeln!(out, "initial.family = csv");
            }
        }
        let _ = writeln!(out, "model.a = {}", self.params.a);
        let _ = writeln!(out, "model.k = {}", self.params.k);
        let _ = writeln!(out, "model.lambda = {}", self.params.lambda);
        let _ = writeln!(out, "model.p = {}", self.params.p);
        let _ = writeln!(out, "model.r = {}", self.params.r);
        if self.params.validation_mode {
            let _ = writeln!(out, "model.validation = true");
        }
        if let Some(dir) = &self.output_dir {
            let _ = writeln!(out, "output.dir = {dir}");
        }
        let _ = writeln!(out, "run.sample_every = {}", self.plan.sample_every);
        if let Some(every) = self.plan.snapshot_every {
            let _ = writeln!(out, "run.snapshot_every = {every}");
        }
        let _ = writeln!(out, "run.t_end = {}", self.plan.t_end);
        write_scheme(&mut out, &self.scheme);
        out
    }
}

fn join_list(values: &[f64]) -> String {
    values
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(", ")
}

impl SweepConfig {
    /// Serialize with sorted keys (same conventions as [`RunConfig`]).
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "grid.intervals = {}", self.grid.intervals());
        let _ = writeln!(out, "grid.length = {}", self.grid.length());
        if let Some(dir) = &self.output_dir {
            let _ = writeln!(out, "output.dir = {dir}");
        }
        write_scheme(&mut out, &self.scheme);
        let _ = writeln!(out, "sweep.a = {}", join_list(&self.a));
        let _ = writeln!(out, "sweep.amplitude = {}", join_list(&self.amplitude));
        let _ = writeln!(out, "sweep.center = {}", self.center);
        let _ = writeln!(out, "sweep.chirp = {}", join_list(&self.chirp));
        let _ = writeln!(out, "sweep.k = {}", self.k);
        let _ = writeln!(out, "sweep.lambda = {}", join_list(&self.lambda));
        let _ = writeln!(out, "sweep.p = {}", join_list(&self.p));
        let _ = writeln!(out, "sweep.r = {}", join_list(&self.r));
        let _ = writeln!(out, "sweep.refine = {}", self.refine_detections);
        let _ = writeln!(out, "sweep.sample_every = {}", self.sample_every);
        let _ = writeln!(out, "sweep.t_end = {}", self.t_end);
        let _ = writeln!(out, "sweep.width = {}", self.width);
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const RUN_TEXT: &str = "\
# reference run
model.lambda = 1.5
model.p = 2
model.k = 1
model.r = 3
model.a = 0.5

grid.length = 40
grid.intervals = 2048

scheme.dt0 = 0.001
scheme.adapt = true
scheme.dt_min = 1e-8

initial.family = gaussian
initial.amplitude = 1.2
initial.center = 2
initial.width = 1
initial.chirp = 0.25

run.t_end = 2
run.sample_every = 20
output.dir = out/reference
";

    #[test]
    fn run_config_parses_and_round_trips() {
        let cfg = parse_run_config(RUN_TEXT).unwrap();
        assert_eq!(cfg.params.lambda, 1.5);
        assert_eq!(cfg.params.a, 0.5);
        assert_eq!(cfg.grid.intervals(), 2048);
        assert!(cfg.scheme.adapt);
        assert_eq!(cfg.scheme.dt_min, 1e-8);
        assert_eq!(cfg.plan.sample_every, 20);
        assert_eq!(cfg.plan.snapshot_every, None);
        assert_eq!(cfg.output_dir.as_deref(), Some("out/reference"));
        match &cfg.initial {
            InitialData::Gaussian {
                amplitude, chirp, ..
            } => {
                assert_eq!(*amplitude, 1.2);
                assert_eq!(*chirp, 0.25);
            }
            other => panic!("wrong family: {other:?}"),
        }

        // Serialize → parse → serialize is byte-stable.
        let text = cfg.to_text();
        let reparsed = parse_run_config(&text).unwrap();
        assert_eq!(reparsed.to_text(), text);
    }

    #[test]
    fn run_config_rejects_malformed_input() {
        assert!(matches!(
            parse_run_config("model.lambda 1.0\n"),
            Err(ConfigError::Malformed { line: 1, .. })
        ));
        let dup = format!("{RUN_TEXT}model.lambda = 2\n");
        assert!(matches!(
            parse_run_config(&dup),
            Err(ConfigError::DuplicateKey(_))
        ));
        let unknown = format!("{RUN_TEXT}model.mystery = 2\n");
        assert!(matches!(
            parse_run_config(&unknown),
            Err(ConfigError::UnknownKey(_))
        ));
        let missing = RUN_TEXT.replace("run.t_end = 2\n", "");
        assert!(matches!(
            parse_run_config(&missing),
            Err(ConfigError::MissingKey(_))
        ));
        let bad = RUN_TEXT.replace("run.t_end = 2", "run.t_end = soon");
        assert!(matches!(
            parse_run_config(&bad),
            Err(ConfigError::BadValue { .. })
        ));
        let negative = RUN_TEXT.replace("model.lambda = 1.5", "model.lambda = -1");
        assert!(matches!(
            parse_run_config(&negative),
            Err(ConfigError::Invalid { .. })
        ));
    }

    #[test]
    fn validation_mode_key_switches_constructor() {
        let text = RUN_TEXT
            .replace("model.lambda = 1.5", "model.lambda = 0")
            .replace("model.k = 1", "model.k = 0\nmodel.validation = true");
        let cfg = parse_run_config(&text).unwrap();
        assert!(cfg.params.validation_mode);
        assert_eq!(cfg.params.lambda, 0.0);
    }

    const SWEEP_TEXT: &str = "\
grid.length = 20
grid.intervals = 256
scheme.dt0 = 0.001
sweep.r = 1, 3, 4.5
sweep.p = 2, 6
sweep.a = 0, 1
sweep.lambda = 1
sweep.amplitude = 0.5, 1.5
sweep.chirp = 0.5
sweep.t_end = 0.5
";

    #[test]
    fn sweep_config_parses_lists_and_round_trips() {
        let cfg = parse_sweep_config(SWEEP_TEXT).unwrap();
        assert_eq!(cfg.r, vec![1.0, 3.0, 4.5]);
        assert_eq!(cfg.p, vec![2.0, 6.0]);
        assert_eq!(cfg.amplitude, vec![0.5, 1.5]);
        assert_eq!(cfg.k, 1.0);
        assert!(cfg.refine_detections);
        let text = cfg.to_text();
        let reparsed = parse_sweep_config(&text).unwrap();
        assert_eq!(reparsed.to_text(), text);
    }

    #[test]
    fn sweep_config_rejects_empty_list_entries() {
        let bad = SWEEP_TEXT.replace("sweep.r = 1, 3, 4.5", "sweep.r = 1,, 3");
        assert!(matches!(
            parse_sweep_config(&bad),
            Err(ConfigError::BadValue { .. })
        ));
    }
}
