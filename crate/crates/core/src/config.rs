//! Run configuration shared by every pipeline stage.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evaluation::{fold_train_config, EvalConfig, Method};
use crate::feedback::DEFAULT_THRESHOLD;
use crate::kinematics::FeatureConfig;
use crate::nn::TrainConfig;
use crate::selector::{RfeConfig, RlConfig};

/// Default file locations; command-line flags take precedence.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Paths {
    #[serde(default)]
    pub corpus: Option<PathBuf>,
    #[serde(default)]
    pub features: Option<PathBuf>,
    #[serde(default)]
    pub model: Option<PathBuf>,
    #[serde(default)]
    pub results: Option<PathBuf>,
    /// Therapist-agreement row appended to the results table when present.
    #[serde(default)]
    pub tp_agreement: Option<PathBuf>,
    #[serde(default)]
    pub templates: Option<PathBuf>,
}

fn default_threshold() -> f64 {
    DEFAULT_THRESHOLD
}

fn default_methods() -> Vec<Method> {
    Method::ALL.to_vec()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub paths: Paths,
    #[serde(default)]
    pub features: FeatureConfig,
    /// Grid for the deployable classifier.
    #[serde(default)]
    pub train: TrainConfig,
    /// Grid for the classifiers fitted inside every evaluation fold.
    #[serde(default = "fold_train_config")]
    pub eval_train: TrainConfig,
    #[serde(default)]
    pub rl: RlConfig,
    #[serde(default)]
    pub rfe: RfeConfig,
    #[serde(default = "default_methods")]
    pub methods: Vec<Method>,
    #[serde(default = "default_threshold")]
    pub feedback_threshold: f64,
    #[serde(default)]
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("defaults")
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        self.features.validate()?;
        self.train.validate()?;
        if !(self.feedback_threshold.is_finite() && self.feedback_threshold > 0.0) {
            return Err(Error::Config(format!("feedback_threshold must be positive, got {}", self.feedback_threshold)));
        }
        self.eval_config().validate()
    }

    /// Replaces every seed with `seed`.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self.train.seed = seed;
        self.eval_train.seed = seed;
        self.rl.seed = seed;
        self.rfe.seed = seed;
        self
    }

    pub fn eval_config(&self) -> EvalConfig {
        EvalConfig {
            methods: self.methods.clone(),
            train: self.eval_train.clone(),
            rl: self.rl.clone(),
            rfe: self.rfe.clone(),
            seed: self.seed,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_object_gives_defaults() {
        let cfg = RunConfig::from_json("{}").unwrap();
        assert_eq!(cfg, RunConfig::default());
        assert_eq!(cfg.feedback_threshold, DEFAULT_THRESHOLD);
        assert_eq!(cfg.methods, Method::ALL.to_vec());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(matches!(RunConfig::from_json(r#"{"sed": 3}"#), Err(Error::Config(_))));
        assert!(RunConfig::from_json(r#"{"rl": {"episodez": 3}}"#).is_err());
    }

    #[test]
    fn invalid_subconfig_is_rejected() {
        assert!(RunConfig::from_json(r#"{"feedback_threshold": 0}"#).is_err());
        assert!(RunConfig::from_json(r#"{"methods": []}"#).is_err());
        assert!(RunConfig::from_json(r#"{"rl": {"episodes": 0}}"#).is_err());
    }

    #[test]
    fn seed_propagates() {
        let cfg = RunConfig::default().with_seed(9);
        assert_eq!((cfg.train.seed, cfg.rl.seed, cfg.rfe.seed, cfg.eval_config().seed), (9, 9, 9, 9));
    }
}
