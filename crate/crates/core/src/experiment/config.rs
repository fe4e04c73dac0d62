//! Experiment configuration, read from a flat TOML file.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::bayes::{NoiseMode, NoiseModel};
use crate::error::{Error, Result};
use crate::mdp::DEFAULT_TIE_TOL;
use crate::oracle::OracleNoise;
use crate::strategy::{StrategyConfig, StrategyKind};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeedbackKind {
    Action,
    Reward,
    Mixed,
}

/// Which kind of query a step issues.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Feedback {
    Action,
    Reward,
    /// Fraction of steps that ask for an action.
    Mixed(f64),
}

impl Feedback {
    /// Whether step `t` (0-based among query steps) asks for an action.
    /// Mixed mode spreads action queries evenly at the configured rate.
    pub fn is_action_step(self, t: usize) -> bool {
        match self {
            Feedback::Action => true,
            Feedback::Reward => false,
            Feedback::Mixed(f) => ((t + 1) as f64 * f).floor() > (t as f64 * f).floor(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub domain: String,
    pub domain_seed: u64,
    pub strategy: StrategyKind,
    pub c_hat: Option<f64>,
    pub iqbc_weighted: bool,
    pub feedback: FeedbackKind,
    pub action_fraction: f64,
    pub num_trials: usize,
    pub num_steps: usize,
    pub pool_size: usize,
    pub pool_seed: u64,
    pub noise_mode: NoiseMode,
    pub beta_star: f64,
    pub gamma_star: Option<f64>,
    pub beta_hat: f64,
    pub gamma_hat: Option<f64>,
    pub sigma: f64,
    pub sigma_hat: f64,
    pub tie_tol: f64,
    pub delta: f64,
    pub master_seed: u64,
    pub output_path: Option<PathBuf>,
    pub record_timing: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            domain: "random-10x5".into(),
            domain_seed: 0,
            strategy: StrategyKind::GbsV2,
            c_hat: None,
            iqbc_weighted: true,
            feedback: FeedbackKind::Action,
            action_fraction: 0.5,
            num_trials: 200,
            num_steps: 100,
            pool_size: 500,
            pool_seed: 0,
            noise_mode: NoiseMode::Aggregated,
            beta_star: 0.1,
            gamma_star: None,
            beta_hat: 0.1,
            gamma_hat: None,
            sigma: 0.0,
            sigma_hat: 0.1,
            tie_tol: DEFAULT_TIE_TOL,
            delta: 0.05,
            master_seed: 0,
            output_path: None,
            record_timing: false,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let config: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    /// Reads a config; a relative `output_path` is resolved against the
    /// config file's directory.
    pub fn from_file(path: &Path) -> Result<Self> {
        let mut config = Self::from_toml_str(&std::fs::read_to_string(path)?)?;
        if let (Some(out), Some(dir)) = (&config.output_path, path.parent()) {
            if out.is_relative() {
                config.output_path = Some(dir.join(out));
            }
        }
        Ok(config)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.strategy == StrategyKind::Emg {
            return Err(Error::NotImplemented("expected myopic gain query selection"));
        }
        self.strategy_config().validate()?;
        if self.num_trials == 0 {
            return bad("num_trials must be at least 1".into());
        }
        if self.pool_size == 0 {
            return bad("pool_size must be at least 1".into());
        }
        if !(0.0..=1.0).contains(&self.action_fraction) {
            return bad(format!("action_fraction {} outside [0, 1]", self.action_fraction));
        }
        if !(0.0..1.0).contains(&self.beta_star) {
            return bad(format!("beta_star {} outside [0, 1)", self.beta_star));
        }
        if !(self.beta_hat > 0.0 && self.beta_hat < 1.0) {
            return bad(format!("beta_hat {} outside (0, 1)", self.beta_hat));
        }
        if !(self.sigma >= 0.0) {
            return bad(format!("sigma {} is negative", self.sigma));
        }
        if !(self.sigma_hat > 0.0) {
            return bad(format!("sigma_hat {} must be positive", self.sigma_hat));
        }
        if !(self.tie_tol >= 0.0) {
            return bad(format!("tie_tol {} is negative", self.tie_tol));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return bad(format!("delta {} outside (0, 1)", self.delta));
        }
        Ok(())
    }

    pub fn strategy_config(&self) -> StrategyConfig {
        StrategyConfig {
            kind: self.strategy,
            c_hat: self.c_hat,
            rng_seed: self.master_seed,
            iqbc_weighted: self.iqbc_weighted,
        }
    }

    pub fn feedback(&self) -> Feedback {
        match self.feedback {
            FeedbackKind::Action => Feedback::Action,
            FeedbackKind::Reward => Feedback::Reward,
            FeedbackKind::Mixed => Feedback::Mixed(self.action_fraction),
        }
    }

    /// Expert noise. In aggregated mode `beta_star` is the total mass off the
    /// optimal set; in per-action mode it is the probability of each
    /// non-optimal action.
    pub fn oracle_noise(&self, num_actions: usize) -> Result<OracleNoise> {
        if let Some(g) = self.gamma_star {
            let total = match self.noise_mode {
                NoiseMode::Aggregated => self.beta_star + g,
                // Single optimal action.
                NoiseMode::PerAction => (num_actions as f64 - 1.0) * self.beta_star + g,
            };
            if (total - 1.0).abs() > 1e-9 {
                return Err(Error::Config(format!(
                    "beta_star {} and gamma_star {g} do not normalize in {:?} mode",
                    self.beta_star, self.noise_mode
                )));
            }
        }
        Ok(match self.noise_mode {
            NoiseMode::Aggregated => OracleNoise::OptimalMass(1.0 - self.beta_star),
            NoiseMode::PerAction => OracleNoise::WrongAction(self.beta_star),
        })
    }

    pub fn noise_model(&self, num_states: usize, num_actions: usize) -> Result<NoiseModel> {
        let gamma = self.gamma_hat.unwrap_or(match self.noise_mode {
            NoiseMode::Aggregated => 1.0 - self.beta_hat,
            NoiseMode::PerAction => 1.0 - (num_actions as f64 - 1.0) * self.beta_hat,
        });
        NoiseModel::new(
            self.noise_mode,
            num_actions,
            vec![self.beta_hat; num_states],
            vec![gamma; num_states],
            self.sigma_hat,
        )
        .map_err(|e| Error::Config(e.to_string()))
    }
}
