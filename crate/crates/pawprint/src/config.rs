//! Run configuration: flat `key = value` lines, `#` starts a comment.

use std::num::NonZeroUsize;
use std::str::FromStr;

use pawprint_core::eval::EmptyClassPolicy;
use pawprint_core::experiment::ExperimentConfig;
use pawprint_core::FusionWeight;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`")]
    Syntax { line: usize },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: key `{key}` set twice")]
    RepeatedKey { line: usize, key: String },
    #[error("line {line}: invalid value `{value}` for `{key}`: {reason}")]
    InvalidValue {
        line: usize,
        key: String,
        value: String,
        reason: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub alpha: f64,
    pub k: usize,
    pub out_side: usize,
    pub seed: u64,
    pub fallback_raw: bool,
    pub temperature: f64,
    pub folds: usize,
    pub augment: bool,
    pub exclude_empty_classes: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        let core = ExperimentConfig::default();
        RunConfig {
            alpha: core.alpha.alpha(),
            k: core.top_k.get(),
            out_side: 224,
            seed: core.seed,
            fallback_raw: core.fallback_raw,
            temperature: core.temperature,
            folds: core.folds,
            augment: core.augment,
            exclude_empty_classes: core.empty_classes == EmptyClassPolicy::Exclude,
        }
    }
}

const KEYS: [&str; 9] = [
    "alpha",
    "k",
    "out_side",
    "seed",
    "fallback_raw",
    "temperature",
    "folds",
    "augment",
    "exclude_empty_classes",
];

fn parse<T: FromStr>(line: usize, key: &str, value: &str) -> Result<T, ConfigError>
where
    T::Err: std::fmt::Display,
{
    value
        .parse()
        .map_err(|e: T::Err| ConfigError::InvalidValue {
            line,
            key: key.into(),
            value: value.into(),
            reason: e.to_string(),
        })
}

fn check(ok: bool, line: usize, key: &str, value: &str, reason: &str) -> Result<(), ConfigError> {
    if ok {
        Ok(())
    } else {
        Err(ConfigError::InvalidValue {
            line,
            key: key.into(),
            value: value.into(),
            reason: reason.into(),
        })
    }
}

impl FromStr for RunConfig {
    type Err = ConfigError;

    /// Unset keys keep their defaults.
    fn from_str(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = RunConfig::default();
        let mut set = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or_default().trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content
                .split_once('=')
                .ok_or(ConfigError::Syntax { line })?;
            let (key, value) = (key.trim(), value.trim());
            if !KEYS.contains(&key) {
                return Err(ConfigError::UnknownKey {
                    line,
                    key: key.into(),
                });
            }
            if set.contains(&key) {
                return Err(ConfigError::RepeatedKey {
                    line,
                    key: key.into(),
                });
            }
            set.push(key);
            match key {
                "alpha" => {
                    cfg.alpha = parse(line, key, value)?;
                    check(
                        FusionWeight::new(cfg.alpha).is_ok(),
                        line,
                        key,
                        value,
                        "must lie in [0, 1]",
                    )?;
                }
                "k" => {
                    cfg.k = parse(line, key, value)?;
                    check(cfg.k >= 1, line, key, value, "must be at least 1")?;
                }
                "out_side" => {
                    cfg.out_side = parse(line, key, value)?;
                    check(cfg.out_side >= 1, line, key, value, "must be positive")?;
                }
                "seed" => cfg.seed = parse(line, key, value)?,
                "fallback_raw" => cfg.fallback_raw = parse(line, key, value)?,
                "temperature" => {
                    cfg.temperature = parse(line, key, value)?;
                    let t = cfg.temperature;
                    check(
                        t > 0.0 && t.is_finite(),
                        line,
                        key,
                        value,
                        "must be positive and finite",
                    )?;
                }
                "folds" => {
                    cfg.folds = parse(line, key, value)?;
                    check(cfg.folds >= 2, line, key, value, "must be at least 2")?;
                }
                "augment" => cfg.augment = parse(line, key, value)?,
                "exclude_empty_classes" => cfg.exclude_empty_classes = parse(line, key, value)?,
                _ => unreachable!("checked against KEYS"),
            }
        }
        Ok(cfg)
    }
}

impl RunConfig {
    pub fn experiment(&self) -> ExperimentConfig {
        ExperimentConfig {
            alpha: FusionWeight::new(self.alpha).expect("validated on parse"),
            top_k: NonZeroUsize::new(self.k).expect("validated on parse"),
            folds: self.folds,
            seed: self.seed,
            temperature: self.temperature,
            fallback_raw: self.fallback_raw,
            augment: self.augment,
            empty_classes: if self.exclude_empty_classes {
                EmptyClassPolicy::Exclude
            } else {
                EmptyClassPolicy::Error
            },
        }
    }

    pub fn to_text(&self) -> String {
        format!(
            "alpha = {}\nk = {}\nout_side = {}\nseed = {}\nfallback_raw = {}\ntemperature = {}\nfolds = {}\naugment = {}\nexclude_empty_classes = {}\n",
            self.alpha,
            self.k,
            self.out_side,
            self.seed,
            self.fallback_raw,
            self.temperature,
            self.folds,
            self.augment,
            self.exclude_empty_classes
        )
    }
}
