//! Run configuration, read from an INI-style file:
//!
//! ```ini
//! [family]
//! preset = diagonal-decay     ; or: matrix = family.txt
//! N = 48
//! R = 3
//! seed = 0
//!
//! [schedule]
//! rule_target = 0.9
//! I_max = 2
//!
//! [grid]
//! extent = 12
//! step = 0.05
//!
//! [verify]
//! seed = 0
//! ```
//!
//! Unknown sections or keys are rejected so typos cannot silently fall back
//! to defaults. A relative `matrix` path is resolved against the directory
//! of the config file.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use ini::Ini;
use serde::Serialize;
use thiserror::Error;

use crate::operator::Preset;
use crate::wavelet::MAX_ORDER_LIMIT;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("cannot read config {path}: {reason}")]
    Unreadable { path: String, reason: String },
    #[error("config syntax error: {0}")]
    Syntax(String),
    #[error("unknown config entry [{section}] {key}")]
    UnknownKey { section: String, key: String },
    #[error("invalid value for [{section}] {key} = `{value}`: {reason}")]
    InvalidValue {
        section: String,
        key: String,
        value: String,
        reason: String,
    },
    #[error("config must name exactly one of [family] preset or matrix")]
    FamilySource,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilySource {
    Preset(Preset),
    Matrix(PathBuf),
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FamilyConfig {
    pub source: FamilySource,
    pub dim: usize,
    pub count: usize,
    pub seed: u64,
    pub decay_exponent: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScheduleConfig {
    pub rule_target: f64,
    pub e_cap: Option<usize>,
    pub geometric_target: f64,
    pub per_scale: Option<usize>,
    pub x_rule_target: f64,
    pub shell_radius: Option<u32>,
    pub i_max: usize,
    pub quadrature_nodes: usize,
    pub bell_sharpness: f64,
    pub drop_tol: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GridConfig {
    pub extent: f64,
    pub step: f64,
    /// derivative order budget of the kernel fields (default `I_max`)
    pub orders: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VerifyConfig {
    pub seed: u64,
    pub test_functions: usize,
    pub representation_tolerance: f64,
    pub fd_tolerance: f64,
    pub margin_fraction: f64,
    pub ring_fraction: f64,
    pub schwarz_samples: usize,
    pub nested_extents: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunConfig {
    pub family: FamilyConfig,
    pub schedule: ScheduleConfig,
    pub grid: GridConfig,
    pub verify: VerifyConfig,
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        Self {
            rule_target: 0.5,
            e_cap: None,
            geometric_target: 0.5,
            per_scale: None,
            x_rule_target: 0.5,
            shell_radius: None,
            i_max: 2,
            quadrature_nodes: 256,
            bell_sharpness: 1.0,
            drop_tol: 1e-12,
        }
    }
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            extent: 12.0,
            step: 0.05,
            orders: None,
        }
    }
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            test_functions: 8,
            representation_tolerance: 1e-2,
            fd_tolerance: 1e-3,
            margin_fraction: 0.1,
            ring_fraction: 0.05,
            schwarz_samples: 400,
            nested_extents: vec![6.0, 8.0, 12.0],
        }
    }
}

impl RunConfig {
    /// Defaults around a preset family.
    pub fn for_preset(preset: Preset, dim: usize, count: usize) -> Self {
        Self {
            family: FamilyConfig {
                source: FamilySource::Preset(preset),
                dim,
                count,
                seed: 0,
                decay_exponent: 1.0,
            },
            schedule: ScheduleConfig::default(),
            grid: GridConfig::default(),
            verify: VerifyConfig::default(),
        }
    }

    /// Derivative order budget of the kernel fields.
    pub fn orders(&self) -> usize {
        self.grid.orders.unwrap_or(self.schedule.i_max)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Unreadable {
            path: path.display().to_string(),
            reason: e.to_string(),
        })?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        Self::parse(&text, base)
    }

    pub fn parse(text: &str, base_dir: &Path) -> Result<Self, ConfigError> {
        let ini = Ini::load_from_str(text).map_err(|e| ConfigError::Syntax(e.to_string()))?;
        let mut preset = None;
        let mut matrix = None;
        let mut cfg = RunConfig::for_preset(Preset::Zero, 48, 3);
        for (section, props) in ini.iter() {
            let section = section.unwrap_or("");
            for (key, value) in props.iter() {
                let v = Value { section, key, value };
                match (section, key) {
                    ("family", "preset") => {
                        preset = Some(Preset::from_str(value).map_err(|e| v.invalid(e.to_string()))?)
                    }
                    ("family", "matrix") => matrix = Some(base_dir.join(value.trim())),
                    ("family", "N") => cfg.family.dim = v.positive()?,
                    ("family", "R") => cfg.family.count = v.positive()?,
                    ("family", "seed") => cfg.family.seed = v.parse()?,
                    ("family", "decay_exponent") => cfg.family.decay_exponent = v.positive_real()?,
                    ("schedule", "rule_target") => cfg.schedule.rule_target = v.unit_interval()?,
                    ("schedule", "e_cap") => cfg.schedule.e_cap = Some(v.positive()?),
                    ("schedule", "geometric_target") => cfg.schedule.geometric_target = v.unit_interval()?,
                    ("schedule", "per_scale") => cfg.schedule.per_scale = Some(v.positive()?),
                    ("schedule", "x_rule_target") => cfg.schedule.x_rule_target = v.unit_interval()?,
                    ("schedule", "shell_radius") => cfg.schedule.shell_radius = Some(v.positive()? as u32),
                    ("schedule", "I_max") => {
                        let i: usize = v.parse()?;
                        if i > MAX_ORDER_LIMIT {
                            return Err(v.invalid(format!("at most {MAX_ORDER_LIMIT}")));
                        }
                        cfg.schedule.i_max = i;
                    }
                    ("schedule", "quadrature_nodes") => cfg.schedule.quadrature_nodes = v.positive()?,
                    ("schedule", "bell_sharpness") => cfg.schedule.bell_sharpness = v.positive_real()?,
                    ("schedule", "drop_tol") => cfg.schedule.drop_tol = v.unit_interval()?,
                    ("grid", "extent") => cfg.grid.extent = v.positive_real()?,
                    ("grid", "step") => cfg.grid.step = v.positive_real()?,
                    ("grid", "orders") => cfg.grid.orders = Some(v.parse()?),
                    ("verify", "seed") => cfg.verify.seed = v.parse()?,
                    ("verify", "test_functions") => cfg.verify.test_functions = v.positive()?,
                    ("verify", "representation_tolerance") => {
                        cfg.verify.representation_tolerance = v.positive_real()?
                    }
                    ("verify", "fd_tolerance") => cfg.verify.fd_tolerance = v.positive_real()?,
                    ("verify", "margin_fraction") => cfg.verify.margin_fraction = v.positive_real()?,
                    ("verify", "ring_fraction") => cfg.verify.ring_fraction = v.unit_interval()?,
                    ("verify", "schwarz_samples") => cfg.verify.schwarz_samples = v.positive()?,
                    ("verify", "nested_extents") => {
                        let extents = value
                            .split(',')
                            .map(|t| t.trim().parse::<f64>())
                            .collect::<Result<Vec<f64>, _>>()
                            .map_err(|e| v.invalid(e.to_string()))?;
                        if extents.len() < 2 || extents.windows(2).any(|w| w[1] <= w[0]) || extents[0] <= 0.0 {
                            return Err(v.invalid("expected at least two increasing positive extents".into()));
                        }
                        cfg.verify.nested_extents = extents;
                    }
                    _ => {
                        return Err(ConfigError::UnknownKey {
                            section: section.to_string(),
                            key: key.to_string(),
                        })
                    }
                }
            }
        }
        if cfg.grid.orders.is_some_and(|o| o > cfg.schedule.i_max) {
            return Err(ConfigError::InvalidValue {
                section: "grid".into(),
                key: "orders".into(),
                value: cfg.grid.orders.unwrap_or_default().to_string(),
                reason: format!("exceeds I_max = {}", cfg.schedule.i_max),
            });
        }
        cfg.family.source = match (preset, matrix) {
            (Some(p), None) => FamilySource::Preset(p),
            (None, Some(m)) => FamilySource::Matrix(m),
            _ => return Err(ConfigError::FamilySource),
        };
        Ok(cfg)
    }
}

struct Value<'a> {
    section: &'a str,
    key: &'a str,
    value: &'a str,
}

impl Value<'_> {
    fn invalid(&self, reason: String) -> ConfigError {
        ConfigError::InvalidValue {
            section: self.section.to_string(),
            key: self.key.to_string(),
            value: self.value.to_string(),
            reason,
        }
    }

    fn parse<T: FromStr>(&self) -> Result<T, ConfigError>
    where
        T::Err: std::fmt::Display,
    {
        self.value.trim().parse::<T>().map_err(|e| self.invalid(e.to_string()))
    }

    fn positive(&self) -> Result<usize, ConfigError> {
        let n: usize = self.parse()?;
        if n == 0 {
            return Err(self.invalid("must be positive".into()));
        }
        Ok(n)
    }

    fn positive_real(&self) -> Result<f64, ConfigError> {
        let x: f64 = self.parse()?;
        if !(x > 0.0 && x.is_finite()) {
            return Err(self.invalid("must be a positive finite number".into()));
        }
        Ok(x)
    }

    fn unit_interval(&self) -> Result<f64, ConfigError> {
        let x: f64 = self.parse()?;
        if !(x > 0.0 && x < 1.0) {
            return Err(self.invalid("must lie strictly between 0 and 1".into()));
        }
        Ok(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const REFERENCE: &str = "\
[family]
preset = diagonal-decay
N = 48
R = 3

[schedule]
rule_target = 0.9
I_max = 2

[grid]
extent = 12
step = 0.05
";

    #[test]
    fn parses_reference() {
        let cfg = RunConfig::parse(REFERENCE, Path::new(".")).unwrap();
        assert_eq!(cfg.family.source, FamilySource::Preset(Preset::DiagonalDecay));
        assert_eq!((cfg.family.dim, cfg.family.count), (48, 3));
        assert_eq!(cfg.schedule.rule_target, 0.9);
        assert_eq!(cfg.schedule.quadrature_nodes, 256);
        assert_eq!(cfg.verify.nested_extents, vec![6.0, 8.0, 12.0]);
    }

    #[test]
    fn matrix_path_is_relative_to_config() {
        let cfg = RunConfig::parse("[family]\nmatrix = m.txt\n", Path::new("/data/run")).unwrap();
        assert_eq!(
            cfg.family.source,
            FamilySource::Matrix(PathBuf::from("/data/run/m.txt"))
        );
    }

    #[test]
    fn rejects_bad_entries() {
        let bad = [
            "[family]\npreset = zero\nN = 0\n",
            "[family]\npreset = zero\n[schedule]\nI_max = 7\n",
            "[family]\npreset = zero\n[schedule]\nrule_target = 1.5\n",
            "[family]\npreset = zero\n[grid]\nstep = -1\n",
            "[family]\npreset = zero\n[grid]\nstepp = 1\n",
            "[family]\npreset = identity\n",
            "[family]\nN = 4\n",
            "[family]\npreset = zero\nmatrix = x\n",
            "[family]\npreset = zero\n[verify]\nnested_extents = 8, 6\n",
        ];
        for text in bad {
            assert!(RunConfig::parse(text, Path::new(".")).is_err(), "{text}");
        }
    }
}
