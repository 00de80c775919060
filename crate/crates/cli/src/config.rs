//! Flat `key = value` run configuration.
//!
//! Values come from an optional TOML file holding only top-level scalars
//! (plus an optional `sweep` array of strings) and are then overridden by
//! command-line flags.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use dpbft_core::queue::QueueParams;
use dpbft_core::{ModelParams, DEFAULT_EPSILON, DEFAULT_MAX_ITER};

use crate::error::{CliError, Result};

/// Keys accepted in a config file or via `--set`.
pub const KNOWN_KEYS: &[&str] = &[
    "mu", "theta", "gamma", "beta", "p", "L", "N", "lambda", "b", "r1", "r2", "epsilon", "max_iter", "seed",
    "horizon", "warmup", "reps", "mode", "target", "runaway", "checkpoints", "sweep",
];

/// Voting-model keys, in CSV column order.
pub const MODEL_KEYS: &[&str] = &["mu", "theta", "gamma", "beta", "p", "L", "N"];

/// Keys holding integers.
const INTEGER_KEYS: &[&str] = &["L", "N", "b", "max_iter", "seed", "reps", "runaway", "checkpoints"];

/// Keys that may be swept.
pub const SWEEPABLE_KEYS: &[&str] = &["mu", "theta", "gamma", "beta", "p", "L", "N", "lambda", "b", "r1", "r2"];

pub const DEFAULT_HORIZON: f64 = 1e4;
pub const DEFAULT_WARMUP: f64 = 100.0;
pub const DEFAULT_REPS: usize = 20;

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Int(i64),
    Float(f64),
    Str(String),
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int(i) => write!(f, "{i}"),
            Value::Float(x) => write!(f, "{x}"),
            Value::Str(s) => f.write_str(s),
        }
    }
}

impl Value {
    /// Integer, float, then string.
    pub fn parse(s: &str) -> Self {
        let s = s.trim();
        if let Ok(i) = s.parse::<i64>() {
            Value::Int(i)
        } else if let Ok(x) = s.parse::<f64>() {
            Value::Float(x)
        } else {
            Value::Str(s.to_string())
        }
    }
}

pub fn is_integer_key(key: &str) -> bool {
    INTEGER_KEYS.contains(&key)
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunConfig {
    values: BTreeMap<String, Value>,
    sweeps: Vec<String>,
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| match e {
            CliError::Usage(msg) => CliError::Usage(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let table: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| CliError::Usage(format!("malformed config: {}", e.message())))?;
        let mut cfg = Self::default();
        for (key, value) in table {
            if key == "sweep" {
                let items = value
                    .as_array()
                    .ok_or_else(|| CliError::Usage("`sweep` must be an array of strings".into()))?;
                for item in items {
                    let s = item
                        .as_str()
                        .ok_or_else(|| CliError::Usage("`sweep` must be an array of strings".into()))?;
                    cfg.sweeps.push(s.to_string());
                }
                continue;
            }
            let v = match value {
                toml::Value::Integer(i) => Value::Int(i),
                toml::Value::Float(x) => Value::Float(x),
                toml::Value::String(s) => Value::Str(s),
                other => {
                    return Err(CliError::Usage(format!(
                        "key `{key}` must be a number or string, got {}",
                        other.type_str()
                    )))
                }
            };
            cfg.set(&key, v)?;
        }
        Ok(cfg)
    }

    pub fn set(&mut self, key: &str, value: Value) -> Result<()> {
        if !KNOWN_KEYS.contains(&key) || key == "sweep" {
            return Err(CliError::Usage(format!("unknown config key `{key}`")));
        }
        self.values.insert(key.to_string(), value);
        Ok(())
    }

    /// Parses and applies a `KEY=VALUE` override.
    pub fn set_pair(&mut self, pair: &str) -> Result<()> {
        let (k, v) = pair
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("expected KEY=VALUE, got `{pair}`")))?;
        self.set(k.trim(), Value::parse(v))
    }

    pub fn set_sweeps(&mut self, sweeps: Vec<String>) {
        self.sweeps = sweeps;
    }

    pub fn sweeps(&self) -> &[String] {
        &self.sweeps
    }

    pub fn has(&self, key: &str) -> bool {
        self.values.contains_key(key)
    }

    pub fn get(&self, key: &str) -> Option<&Value> {
        self.values.get(key)
    }

    pub fn f64(&self, key: &str) -> Result<f64> {
        match self.values.get(key) {
            Some(Value::Float(x)) => Ok(*x),
            Some(Value::Int(i)) => Ok(*i as f64),
            Some(Value::Str(s)) => Err(CliError::Usage(format!("key `{key}` must be a number, got `{s}`"))),
            None => Err(missing(key)),
        }
    }

    pub fn u64(&self, key: &str) -> Result<u64> {
        match self.values.get(key) {
            Some(Value::Int(i)) if *i >= 0 => Ok(*i as u64),
            Some(v) => Err(CliError::Usage(format!(
                "key `{key}` must be a nonnegative integer, got `{v}`"
            ))),
            None => Err(missing(key)),
        }
    }

    pub fn usize(&self, key: &str) -> Result<usize> {
        let v = self.u64(key)?;
        usize::try_from(v).map_err(|_| CliError::Usage(format!("key `{key}` is too large")))
    }

    pub fn f64_or(&self, key: &str, default: f64) -> Result<f64> {
        if self.has(key) {
            self.f64(key)
        } else {
            Ok(default)
        }
    }

    pub fn usize_or(&self, key: &str, default: usize) -> Result<usize> {
        if self.has(key) {
            self.usize(key)
        } else {
            Ok(default)
        }
    }

    pub fn string(&self, key: &str) -> Option<String> {
        self.values.get(key).map(|v| v.to_string())
    }

    pub fn require(&self, keys: &[&str]) -> Result<()> {
        let missing: Vec<&str> = keys.iter().copied().filter(|k| !self.has(k)).collect();
        if missing.is_empty() {
            Ok(())
        } else {
            Err(CliError::Usage(format!("missing required key(s): {}", missing.join(", "))))
        }
    }

    pub fn model_params(&self) -> Result<ModelParams> {
        self.require(MODEL_KEYS)?;
        Ok(ModelParams::new(
            self.f64("mu")?,
            self.f64("theta")?,
            self.f64("gamma")?,
            self.f64("beta")?,
            self.f64("p")?,
            self.usize("L")?,
            self.usize("N")?,
        )?)
    }

    /// Whether `r1` and `r2` are given directly instead of coming from the
    /// voting model.
    pub fn direct_rates(&self) -> Result<bool> {
        match (self.has("r1"), self.has("r2")) {
            (false, false) => Ok(false),
            (true, true) => {
                let present: Vec<&str> = MODEL_KEYS.iter().copied().filter(|k| self.has(k)).collect();
                if present.is_empty() {
                    Ok(true)
                } else {
                    Err(CliError::Usage(format!(
                        "r1/r2 given directly together with voting-model key(s) {}; use one or the other",
                        present.join(", ")
                    )))
                }
            }
            _ => Err(CliError::Usage("r1 and r2 must be given together".into())),
        }
    }

    /// Queue parameters with `r1`, `r2` supplied by the caller.
    pub fn queue_params(&self, r1: f64, r2: f64) -> Result<QueueParams<f64>> {
        self.require(&["lambda", "b"])?;
        Ok(QueueParams::new(self.f64("lambda")?, self.usize("b")?, r1, r2)?)
    }

    pub fn epsilon(&self) -> Result<f64> {
        let eps = self.f64_or("epsilon", DEFAULT_EPSILON)?;
        if !(eps > 0.0) || !eps.is_finite() {
            return Err(CliError::Usage(format!("epsilon must be positive, got {eps}")));
        }
        Ok(eps)
    }

    pub fn max_iter(&self) -> Result<usize> {
        let n = self.usize_or("max_iter", DEFAULT_MAX_ITER)?;
        if n == 0 {
            return Err(CliError::Usage("max_iter must be at least 1".into()));
        }
        Ok(n)
    }

    pub fn sim_config(&self) -> Result<dpbft_sim::SimConfig> {
        self.require(&["seed"])?;
        Ok(dpbft_sim::SimConfig::new(
            self.u64("seed")?,
            self.f64_or("horizon", DEFAULT_HORIZON)?,
            self.f64_or("warmup", DEFAULT_WARMUP)?,
            self.usize_or("reps", DEFAULT_REPS)?,
        )?)
    }
}

fn missing(key: &str) -> CliError {
    CliError::Usage(format!("missing required key: {key}"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_values_and_overrides() {
        let mut cfg = RunConfig::from_toml(
            "mu = 2\ntheta = 2.0\ngamma = 10\nbeta = 2\np = 0.5\nL = 1\nN = 2\nsweep = [\"p=0.4:0.7:0.1\"]\n",
        )
        .unwrap();
        assert_eq!(cfg.sweeps(), ["p=0.4:0.7:0.1"]);
        cfg.set_pair("p=0.7").unwrap();
        let params = cfg.model_params().unwrap();
        assert_eq!((params.mu, params.p, params.upper), (2.0, 0.7, 2));
    }

    #[test]
    fn value_parsing() {
        assert_eq!(Value::parse("3"), Value::Int(3));
        assert_eq!(Value::parse("1e-9"), Value::Float(1e-9));
        assert_eq!(Value::parse(" system "), Value::Str("system".into()));
    }

    #[test]
    fn rejections() {
        assert!(matches!(RunConfig::from_toml("bogus = 1"), Err(CliError::Usage(_))));
        assert!(matches!(RunConfig::from_toml("mu = [1]"), Err(CliError::Usage(_))));
        assert!(matches!(RunConfig::from_toml("mu = "), Err(CliError::Usage(_))));
        let cfg = RunConfig::from_toml("L = 1.5").unwrap();
        assert!(cfg.usize("L").is_err());
        let err = RunConfig::from_toml("mu = 2").unwrap().model_params().unwrap_err();
        assert!(err.to_string().contains("theta"));
    }

    #[test]
    fn invalid_probability_names_the_field() {
        let cfg = RunConfig::from_toml("mu = 2\ntheta = 2\ngamma = 10\nbeta = 2\np = 1.2\nL = 1\nN = 1").unwrap();
        let err = cfg.model_params().unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(err.to_string().contains("`p`"), "{err}");
    }

    #[test]
    fn direct_rates_exclude_model_keys() {
        let cfg = RunConfig::from_toml("r1 = 0.7\nr2 = 0.1").unwrap();
        assert!(cfg.direct_rates().unwrap());
        let cfg = RunConfig::from_toml("r1 = 0.7").unwrap();
        assert!(cfg.direct_rates().is_err());
        let cfg = RunConfig::from_toml("r1 = 0.7\nr2 = 0.1\nmu = 2").unwrap();
        assert!(cfg.direct_rates().is_err());
        assert!(!RunConfig::default().direct_rates().unwrap());
    }

    #[test]
    fn solver_defaults() {
        let cfg = RunConfig::default();
        assert_eq!(cfg.epsilon().unwrap(), 1e-12);
        assert_eq!(cfg.max_iter().unwrap(), 1_000_000);
        let cfg = RunConfig::from_toml("epsilon = -1").unwrap();
        assert!(cfg.epsilon().is_err());
    }
}
