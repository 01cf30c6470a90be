//! TOML experiment configuration.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::delay::{DelayKind, DelayModel};
use crate::environment::RewardKind;
use crate::error::{Error, Result};
use crate::linear_mle::default_kappa_mu;
use crate::linear_policy::LinearPolicyConfig;
use crate::neural_policy::{NeuralPolicyConfig, TrainConfig};
use crate::policy::Variant;

/// Environment variable whose integer value is added to every seed.
pub const SEED_OFFSET_VAR: &str = "DUELAY_SEED_OFFSET";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Linear,
    Neural,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Linear => "linear",
            Algorithm::Neural => "neural",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvironmentSection {
    pub reward: RewardKind,
    pub dim: usize,
    /// Arms offered per round.
    pub arms: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DelaySection {
    #[serde(flatten)]
    pub kind: DelayKind,
    /// Censoring threshold `M`.
    pub threshold: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub algorithm: Algorithm,
    #[serde(default = "all_variants")]
    pub variants: Vec<Variant>,
    pub horizon: usize,
    pub seeds: Vec<u64>,
    /// Output directory, relative to the working directory.
    #[serde(default)]
    pub output: Option<PathBuf>,
}

fn all_variants() -> Vec<Variant> {
    Variant::ALL.to_vec()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinearSection {
    #[serde(default = "default_linear_lambda")]
    pub lambda: f64,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default = "one")]
    pub beta_scale: f64,
    /// Defaults to `μ'(2)`, the bound for unit arms and a unit parameter.
    #[serde(default)]
    pub kappa_mu: Option<f64>,
    #[serde(default = "default_feature_bound")]
    pub feature_bound: f64,
    #[serde(default = "default_grad_tol")]
    pub grad_tol: f64,
    #[serde(default = "default_max_iters")]
    pub max_iters: usize,
}

impl Default for LinearSection {
    fn default() -> Self {
        Self {
            lambda: default_linear_lambda(),
            delta: default_delta(),
            beta_scale: 1.0,
            kappa_mu: None,
            feature_bound: default_feature_bound(),
            grad_tol: default_grad_tol(),
            max_iters: default_max_iters(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NeuralSection {
    #[serde(default = "one")]
    pub lambda: f64,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default)]
    pub kappa_mu: Option<f64>,
    #[serde(default = "one")]
    pub norm_bound: f64,
    #[serde(default = "default_width")]
    pub width: usize,
    #[serde(default = "default_depth")]
    pub depth: usize,
    #[serde(default = "default_learning_rate")]
    pub learning_rate: f64,
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    #[serde(default = "default_train_tol")]
    pub grad_tol: f64,
    #[serde(default = "one")]
    pub nu_scale: f64,
}

impl Default for NeuralSection {
    fn default() -> Self {
        Self {
            lambda: 1.0,
            delta: default_delta(),
            kappa_mu: None,
            norm_bound: 1.0,
            width: default_width(),
            depth: default_depth(),
            learning_rate: default_learning_rate(),
            epochs: default_epochs(),
            grad_tol: default_train_tol(),
            nu_scale: 1.0,
        }
    }
}

fn one() -> f64 {
    1.0
}
fn default_linear_lambda() -> f64 {
    0.5
}
fn default_delta() -> f64 {
    0.1
}
fn default_feature_bound() -> f64 {
    2.0
}
fn default_grad_tol() -> f64 {
    1e-8
}
fn default_max_iters() -> usize {
    100
}
fn default_width() -> usize {
    64
}
fn default_depth() -> usize {
    2
}
fn default_learning_rate() -> f64 {
    TrainConfig::default().learning_rate
}
fn default_epochs() -> usize {
    TrainConfig::default().epochs
}
fn default_train_tol() -> f64 {
    TrainConfig::default().grad_tol
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub environment: EnvironmentSection,
    pub delay: DelaySection,
    pub run: RunSection,
    #[serde(default)]
    pub linear: LinearSection,
    #[serde(default)]
    pub neural: NeuralSection,
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn delay_model(&self) -> Result<DelayModel> {
        DelayModel::new(self.delay.kind, self.delay.threshold)
    }

    pub fn linear_kappa(&self) -> f64 {
        self.linear
            .kappa_mu
            .unwrap_or_else(|| default_kappa_mu(1.0, self.linear.feature_bound))
    }

    pub fn neural_kappa(&self) -> f64 {
        self.neural.kappa_mu.unwrap_or_else(|| default_kappa_mu(1.0, 2.0))
    }

    pub fn linear_policy(&self, variant: Variant) -> Result<LinearPolicyConfig> {
        let rho = self.delay_model()?.rho();
        Ok(LinearPolicyConfig {
            lambda: self.linear.lambda,
            kappa_mu: self.linear_kappa(),
            delta: self.linear.delta,
            feature_bound: self.linear.feature_bound,
            threshold: self.delay.threshold,
            rho,
            variant,
            beta_scale: self.linear.beta_scale,
            grad_tol: self.linear.grad_tol,
            max_iters: self.linear.max_iters,
        })
    }

    pub fn neural_policy(&self, variant: Variant) -> Result<NeuralPolicyConfig> {
        let rho = self.delay_model()?.rho();
        Ok(NeuralPolicyConfig {
            lambda: self.neural.lambda,
            kappa_mu: self.neural_kappa(),
            delta: self.neural.delta,
            threshold: self.delay.threshold,
            rho,
            norm_bound: self.neural.norm_bound,
            width: self.neural.width,
            depth: self.neural.depth,
            train: TrainConfig {
                learning_rate: self.neural.learning_rate,
                epochs: self.neural.epochs,
                grad_tol: self.neural.grad_tol,
            },
            variant,
            nu_scale: self.neural.nu_scale,
        })
    }

    /// Checks every nested setting; errors are configuration errors.
    pub fn validate(&self) -> Result<()> {
        let cfg_err = |e: Error| Error::Config(e.to_string());
        if self.environment.dim == 0 || self.environment.arms == 0 {
            return Err(Error::Config("environment dim and arms must be positive".into()));
        }
        if self.run.horizon == 0 {
            return Err(Error::Config("horizon must be at least 1".into()));
        }
        if self.run.seeds.is_empty() {
            return Err(Error::Config("at least one seed is required".into()));
        }
        if self.run.variants.is_empty() {
            return Err(Error::Config("at least one variant is required".into()));
        }
        let mut variants = self.run.variants.clone();
        variants.sort_by_key(|v| v.name());
        variants.dedup();
        if variants.len() != self.run.variants.len() {
            return Err(Error::Config("variants must not repeat".into()));
        }
        let mut seeds = self.run.seeds.clone();
        seeds.sort_unstable();
        seeds.dedup();
        if seeds.len() != self.run.seeds.len() {
            return Err(Error::Config("seeds must not repeat".into()));
        }
        self.delay_model().map_err(cfg_err)?;
        for &v in &self.run.variants {
            match self.run.algorithm {
                Algorithm::Linear => self.linear_policy(v)?.validate().map_err(cfg_err)?,
                Algorithm::Neural => self.neural_policy(v)?.validate().map_err(cfg_err)?,
            }
        }
        Ok(())
    }

    /// Seeds after applying the offset from the environment.
    pub fn effective_seeds(&self) -> Result<Vec<u64>> {
        let offset = seed_offset()?;
        Ok(self.run.seeds.iter().map(|s| s.wrapping_add(offset)).collect())
    }
}

/// Reads the seed offset, `0` when unset.
pub fn seed_offset() -> Result<u64> {
    match std::env::var(SEED_OFFSET_VAR) {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| Error::Config(format!("{SEED_OFFSET_VAR} must be a non-negative integer, got {v:?}"))),
        Err(_) => Ok(0),
    }
}

pub const DEMO_LINEAR: &str = include_str!("../../configs/demo_linear.toml");
pub const DEMO_QUADRATIC: &str = include_str!("../../configs/demo_quadratic.toml");
pub const DEMO_CUBIC: &str = include_str!("../../configs/demo_cubic.toml");

/// Built-in demo configuration for a reward setting.
pub fn demo_config(kind: RewardKind) -> ExperimentConfig {
    let text = match kind {
        RewardKind::Linear => DEMO_LINEAR,
        RewardKind::Quadratic => DEMO_QUADRATIC,
        RewardKind::Cubic => DEMO_CUBIC,
    };
    ExperimentConfig::from_toml_str(text).expect("bundled demo config parses")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn demos_parse_and_validate() {
        for kind in [RewardKind::Linear, RewardKind::Quadratic, RewardKind::Cubic] {
            let cfg = demo_config(kind);
            cfg.validate().unwrap();
            assert_eq!(cfg.environment.reward, kind);
            let back = ExperimentConfig::from_toml_str(&cfg.to_toml_string()).unwrap();
            assert_eq!(back, cfg);
        }
    }

    #[test]
    fn minimal_config_uses_defaults() {
        let cfg = ExperimentConfig::from_toml_str(
            r#"
            [environment]
            reward = "linear"
            dim = 4
            arms = 5

            [delay]
            kind = "constant"
            c = 2
            threshold = 3

            [run]
            algorithm = "linear"
            horizon = 10
            seeds = [1, 2]
            "#,
        )
        .unwrap();
        cfg.validate().unwrap();
        assert_eq!(cfg.run.variants, Variant::ALL.to_vec());
        assert_eq!(cfg.delay.kind, DelayKind::Constant { c: 2 });
        assert_eq!(cfg.linear, LinearSection::default());
    }

    #[test]
    fn lambda_condition_is_a_config_error() {
        let mut cfg = demo_config(RewardKind::Linear);
        cfg.linear.lambda = 0.1;
        let err = cfg.validate().unwrap_err();
        assert!(matches!(err, Error::Config(_)));
        assert!(err.to_string().contains("kappa_mu * L^2"));
    }

    #[test]
    fn rejects_unknown_keys_and_bad_values() {
        let text = demo_config(RewardKind::Linear).to_toml_string();
        assert!(ExperimentConfig::from_toml_str(&text.replace("horizon", "horizn")).is_err());
        let mut cfg = demo_config(RewardKind::Linear);
        cfg.run.seeds = vec![1, 1];
        assert!(cfg.validate().is_err());
        cfg.run.seeds.clear();
        assert!(cfg.validate().is_err());
        let mut cfg = demo_config(RewardKind::Cubic);
        cfg.neural.width = 7;
        assert!(cfg.validate().is_err());
    }
}
