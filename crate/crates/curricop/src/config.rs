//! Text configuration covering every knob of the training,
//! environment, learner and evaluation configs.
//!
//! The format is one `key = value` pair per line with dotted key
//! names, `#` comments and blank lines. Unknown keys are errors, so a
//! typo cannot silently fall back to a default. The same `apply` path
//! also serves command-line overrides.
//!
//! `canonical()` renders every key in a fixed order; its FNV-1a hash is
//! the config hash stored in checkpoint manifests, which lets a loaded
//! checkpoint detect that it is being resumed under different settings.

use std::path::Path;

use thiserror::Error;

use crate::env::EnvConfig;
use crate::evalrun::{EvalConfig, EvalMode};
use crate::features::{fnv1a64, FeatureConfig};
use crate::learner::LearnerConfig;
use crate::trainer::{CurriculumMode, TrainConfig};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("reading {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("config line {line}: expected 'key = value', got '{text}'")]
    Malformed { line: usize, text: String },
    #[error("unknown config key '{0}'")]
    UnknownKey(String),
    #[error("config key '{key}': cannot parse '{value}' as {expected}")]
    InvalidValue {
        key: String,
        value: String,
        expected: &'static str,
    },
}

/// Every tunable in one place, with the training-time environment
/// defaults.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FullConfig {
    pub train: TrainConfig,
    pub env: EnvConfig,
    pub learner: LearnerConfig,
    pub eval: EvalConfig,
}

impl Default for FullConfig {
    fn default() -> FullConfig {
        FullConfig {
            train: TrainConfig::default(),
            env: EnvConfig::train(),
            learner: LearnerConfig::default(),
            eval: EvalConfig::default(),
        }
    }
}

fn parse_as<T: std::str::FromStr>(
    key: &str,
    value: &str,
    expected: &'static str,
) -> Result<T, ConfigError> {
    value.parse().map_err(|_| ConfigError::InvalidValue {
        key: key.to_string(),
        value: value.to_string(),
        expected,
    })
}

impl FullConfig {
    /// Sets one key. Used both for config file lines and for
    /// command-line `key=value` overrides.
    pub fn apply(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        match key {
            "train.progress_threshold" => {
                self.train.progress_threshold = parse_as(key, value, "a float")?;
            }
            "train.episodes_per_update" => {
                self.train.episodes_per_update = parse_as(key, value, "an integer")?;
            }
            "train.step_budget" => self.train.step_budget = parse_as(key, value, "an integer")?,
            "train.curriculum" => {
                self.train.curriculum = match value {
                    "global" => CurriculumMode::Global,
                    "per_problem" => CurriculumMode::PerProblem,
                    "off" => CurriculumMode::Off,
                    _ => {
                        return Err(ConfigError::InvalidValue {
                            key: key.to_string(),
                            value: value.to_string(),
                            expected: "one of global, per_problem, off",
                        })
                    }
                };
            }
            "train.seed" => self.train.seed = parse_as(key, value, "an integer")?,
            "env.step_limit" => self.env.step_limit = parse_as(key, value, "an integer")?,
            "env.reward_success" => self.env.reward_success = parse_as(key, value, "a float")?,
            "env.occurs_check" => self.env.occurs_check = parse_as(key, value, "a boolean")?,
            "env.seed" => self.env.seed = parse_as(key, value, "an integer")?,
            "features.block_dim" => {
                let dim: usize = parse_as(key, value, "a power-of-two integer")?;
                if !dim.is_power_of_two() {
                    return Err(ConfigError::InvalidValue {
                        key: key.to_string(),
                        value: value.to_string(),
                        expected: "a power-of-two integer",
                    });
                }
                self.env.features = FeatureConfig::new(dim);
            }
            "learner.gamma" => self.learner.gamma = parse_as(key, value, "a float")?,
            "learner.lam" => self.learner.lam = parse_as(key, value, "a float")?,
            "learner.clip" => self.learner.clip = parse_as(key, value, "a float")?,
            "learner.entropy_coef" => self.learner.entropy_coef = parse_as(key, value, "a float")?,
            "learner.value_coef" => self.learner.value_coef = parse_as(key, value, "a float")?,
            "learner.lr" => self.learner.lr = parse_as(key, value, "a float")?,
            "learner.epochs" => self.learner.epochs = parse_as(key, value, "an integer")?,
            "learner.minibatch" => self.learner.minibatch = parse_as(key, value, "an integer")?,
            "learner.hidden" => self.learner.hidden = parse_as(key, value, "an integer")?,
            "learner.hidden_layers" => {
                self.learner.hidden_layers = parse_as(key, value, "an integer")?;
            }
            "learner.normalize_advantages" => {
                self.learner.normalize_advantages = parse_as(key, value, "a boolean")?;
            }
            "eval.attempts" => self.eval.attempts = parse_as(key, value, "an integer")?,
            "eval.step_limit" => self.eval.step_limit = parse_as(key, value, "an integer")?,
            "eval.wall_limit_secs" => {
                self.eval.wall_limit = if value == "none" {
                    None
                } else {
                    let secs: f64 = parse_as(key, value, "a float or 'none'")?;
                    if !(secs > 0.0) {
                        return Err(ConfigError::InvalidValue {
                            key: key.to_string(),
                            value: value.to_string(),
                            expected: "a positive float or 'none'",
                        });
                    }
                    Some(std::time::Duration::from_secs_f64(secs))
                };
            }
            "eval.mode" => {
                self.eval.mode = match value {
                    "stochastic" => EvalMode::Stochastic,
                    "greedy" => EvalMode::Greedy,
                    _ => {
                        return Err(ConfigError::InvalidValue {
                            key: key.to_string(),
                            value: value.to_string(),
                            expected: "one of stochastic, greedy",
                        })
                    }
                };
            }
            "eval.seed" => self.eval.seed = parse_as(key, value, "an integer")?,
            _ => return Err(ConfigError::UnknownKey(key.to_string())),
        }
        Ok(())
    }

    /// Parses a config text on top of the defaults.
    pub fn parse(text: &str) -> Result<FullConfig, ConfigError> {
        let mut cfg = FullConfig::default();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(ConfigError::Malformed {
                    line: idx + 1,
                    text: line.to_string(),
                });
            };
            cfg.apply(key.trim(), value.trim())?;
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<FullConfig, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        FullConfig::parse(&text)
    }

    /// Every key in a fixed order; parsing this text reproduces the
    /// config exactly.
    pub fn canonical(&self) -> String {
        let wall = match self.eval.wall_limit {
            None => "none".to_string(),
            Some(d) => format!("{}", d.as_secs_f64()),
        };
        format!(
            "env.occurs_check = {}\n\
             env.reward_success = {}\n\
             env.seed = {}\n\
             env.step_limit = {}\n\
             eval.attempts = {}\n\
             eval.mode = {}\n\
             eval.seed = {}\n\
             eval.step_limit = {}\n\
             eval.wall_limit_secs = {}\n\
             features.block_dim = {}\n\
             learner.clip = {}\n\
             learner.entropy_coef = {}\n\
             learner.epochs = {}\n\
             learner.gamma = {}\n\
             learner.hidden = {}\n\
             learner.hidden_layers = {}\n\
             learner.lam = {}\n\
             learner.lr = {}\n\
             learner.minibatch = {}\n\
             learner.normalize_advantages = {}\n\
             learner.value_coef = {}\n\
             train.curriculum = {}\n\
             train.episodes_per_update = {}\n\
             train.progress_threshold = {}\n\
             train.seed = {}\n\
             train.step_budget = {}\n",
            self.env.occurs_check,
            self.env.reward_success,
            self.env.seed,
            self.env.step_limit,
            self.eval.attempts,
            self.eval.mode.name(),
            self.eval.seed,
            self.eval.step_limit,
            wall,
            self.env.features.block_dim,
            self.learner.clip,
            self.learner.entropy_coef,
            self.learner.epochs,
            self.learner.gamma,
            self.learner.hidden,
            self.learner.hidden_layers,
            self.learner.lam,
            self.learner.lr,
            self.learner.minibatch,
            self.learner.normalize_advantages,
            self.learner.value_coef,
            self.train.curriculum.name(),
            self.train.episodes_per_update,
            self.train.progress_threshold,
            self.train.seed,
            self.train.step_budget,
        )
    }

    /// Hash of the canonical serialization, as stored in checkpoint
    /// manifests.
    pub fn config_hash(&self) -> String {
        format!("{:016x}", fnv1a64(self.canonical().as_bytes()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_canonical_text() {
        let cfg = FullConfig::default();
        let parsed = FullConfig::parse(&cfg.canonical()).unwrap();
        assert_eq!(cfg, parsed);
    }

    #[test]
    fn every_field_is_settable_and_round_trips() {
        let text = "\
            # full override\n\
            train.progress_threshold = 0.5\n\
            train.episodes_per_update = 16\n\
            train.step_budget = 12345\n\
            train.curriculum = per_problem\n\
            train.seed = 42\n\
            env.step_limit = 77\n\
            env.reward_success = 2.5\n\
            env.occurs_check = false\n\
            env.seed = 7\n\
            features.block_dim = 64\n\
            learner.gamma = 0.9\n\
            learner.lam = 0.8\n\
            learner.clip = 0.1\n\
            learner.entropy_coef = 0.02\n\
            learner.value_coef = 0.25\n\
            learner.lr = 0.001\n\
            learner.epochs = 2\n\
            learner.minibatch = 32\n\
            learner.hidden = 128\n\
            learner.hidden_layers = 1\n\
            learner.normalize_advantages = false\n\
            eval.attempts = 10\n\
            eval.step_limit = 500\n\
            eval.wall_limit_secs = 1.5\n\
            eval.mode = greedy\n\
            eval.seed = 3\n";
        let cfg = FullConfig::parse(text).unwrap();
        assert_eq!(cfg.train.episodes_per_update, 16);
        assert_eq!(cfg.train.curriculum, CurriculumMode::PerProblem);
        assert_eq!(cfg.env.features.block_dim, 64);
        assert_eq!(cfg.eval.mode, EvalMode::Greedy);
        assert_eq!(
            cfg.eval.wall_limit,
            Some(std::time::Duration::from_secs_f64(1.5))
        );
        assert!(!cfg.learner.normalize_advantages);
        let again = FullConfig::parse(&cfg.canonical()).unwrap();
        assert_eq!(cfg, again);
        assert_ne!(cfg.config_hash(), FullConfig::default().config_hash());
    }

    #[test]
    fn unknown_keys_and_bad_values_are_rejected() {
        assert!(matches!(
            FullConfig::parse("train.threshold = 0.8\n"),
            Err(ConfigError::UnknownKey(_))
        ));
        assert!(matches!(
            FullConfig::parse("train.seed = banana\n"),
            Err(ConfigError::InvalidValue { .. })
        ));
        assert!(matches!(
            FullConfig::parse("features.block_dim = 100\n"),
            Err(ConfigError::InvalidValue { .. })
        ));
        assert!(matches!(
            FullConfig::parse("just some words\n"),
            Err(ConfigError::Malformed { line: 1, .. })
        ));
    }

    #[test]
    fn comments_and_blank_lines_are_ignored() {
        let cfg = FullConfig::parse(
            "# a comment\n\
             \n\
             train.seed = 9   # trailing comment\n",
        )
        .unwrap();
        assert_eq!(cfg.train.seed, 9);
    }

    #[test]
    fn config_hash_is_stable_for_defaults() {
        let a = FullConfig::default().config_hash();
        let b = FullConfig::default().config_hash();
        assert_eq!(a, b);
        assert_eq!(a.len(), 16);
    }
}
