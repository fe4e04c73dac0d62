//! Posterior over a hypothesis space under action and reward feedback.
//!
//! Probabilities are kept in the log domain and renormalized with a single
//! max shift after each update.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hypothesis::HypothesisSpace;
use crate::mdp::ActionSet;

const NOISE_TOL: f64 = 1e-9;

/// Version tag written into posterior snapshots.
pub const SNAPSHOT_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseMode {
    /// Each non-optimal action has probability `beta`, so
    /// `(|A| - 1) * beta + gamma = 1`.
    PerAction,
    /// `beta` is the total mass off the optimal set: `beta + gamma = 1`.
    Aggregated,
}

/// The learner's estimate of the expert's noise.
#[derive(Clone, Debug)]
pub struct NoiseModel {
    mode: NoiseMode,
    beta_hat: Vec<f64>,
    gamma_hat: Vec<f64>,
    sigma_hat: f64,
    log_beta: Vec<f64>,
    log_gamma: Vec<f64>,
}

impl NoiseModel {
    pub fn new(
        mode: NoiseMode,
        num_actions: usize,
        beta_hat: Vec<f64>,
        gamma_hat: Vec<f64>,
        sigma_hat: f64,
    ) -> Result<Self> {
        if beta_hat.len() != gamma_hat.len() {
            return Err(Error::Argument("beta_hat and gamma_hat lengths differ".into()));
        }
        if !(sigma_hat > 0.0) || !sigma_hat.is_finite() {
            return Err(Error::Argument(format!("sigma_hat {sigma_hat} must be positive")));
        }
        for (x, (&b, &g)) in beta_hat.iter().zip(&gamma_hat).enumerate() {
            if !(b > 0.0 && b < 1.0) {
                return Err(Error::Argument(format!("beta_hat({x}) = {b} is outside (0, 1)")));
            }
            let total = match mode {
                NoiseMode::PerAction => (num_actions as f64 - 1.0) * b + g,
                NoiseMode::Aggregated => b + g,
            };
            if (total - 1.0).abs() > NOISE_TOL {
                return Err(Error::Argument(format!(
                    "noise at state {x} does not normalize under {mode:?} (sum {total})"
                )));
            }
            if b > g {
                return Err(Error::Argument(format!(
                    "beta_hat({x}) = {b} exceeds gamma_hat({x}) = {g}"
                )));
            }
        }
        let log_beta = beta_hat.iter().map(|b| b.ln()).collect();
        let log_gamma = gamma_hat.iter().map(|g| g.ln()).collect();
        Ok(NoiseModel {
            mode,
            beta_hat,
            gamma_hat,
            sigma_hat,
            log_beta,
            log_gamma,
        })
    }

    /// Constant per-action noise; `gamma_hat = 1 - (|A| - 1) * beta_hat`.
    pub fn per_action(num_states: usize, num_actions: usize, beta_hat: f64, sigma_hat: f64) -> Result<Self> {
        let gamma = 1.0 - (num_actions as f64 - 1.0) * beta_hat;
        Self::new(
            NoiseMode::PerAction,
            num_actions,
            vec![beta_hat; num_states],
            vec![gamma; num_states],
            sigma_hat,
        )
    }

    /// Constant aggregated noise; `gamma_hat = 1 - beta_hat`.
    pub fn aggregated(num_states: usize, num_actions: usize, beta_hat: f64, sigma_hat: f64) -> Result<Self> {
        Self::new(
            NoiseMode::Aggregated,
            num_actions,
            vec![beta_hat; num_states],
            vec![1.0 - beta_hat; num_states],
            sigma_hat,
        )
    }

    pub fn mode(&self) -> NoiseMode {
        self.mode
    }

    pub fn beta_hat(&self) -> &[f64] {
        &self.beta_hat
    }

    pub fn gamma_hat(&self) -> &[f64] {
        &self.gamma_hat
    }

    pub fn sigma_hat(&self) -> f64 {
        self.sigma_hat
    }

    pub fn num_states(&self) -> usize {
        self.beta_hat.len()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Observation {
    Action { state: usize, action: usize },
    Reward { state: usize, value: f64 },
}

#[derive(Clone, Debug)]
pub struct Posterior {
    log_probs: Vec<f64>,
    history: Vec<Observation>,
}

impl Posterior {
    pub fn from_prior(prior: &[f64]) -> Result<Self> {
        if prior.is_empty() {
            return Err(Error::Argument("empty prior".into()));
        }
        if prior.iter().any(|&p| !(p >= 0.0) || !p.is_finite()) {
            return Err(Error::Argument("prior has negative or non-finite entries".into()));
        }
        let mut post = Posterior {
            log_probs: prior.iter().map(|p| p.ln()).collect(),
            history: Vec::new(),
        };
        post.normalize()?;
        Ok(post)
    }

    pub fn for_space(space: &HypothesisSpace) -> Self {
        Self::from_prior(space.prior()).expect("space priors are normalized")
    }

    pub fn uniform(n: usize) -> Result<Self> {
        Self::from_prior(&vec![1.0; n])
    }

    pub fn len(&self) -> usize {
        self.log_probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.log_probs.is_empty()
    }

    pub fn log_probs(&self) -> &[f64] {
        &self.log_probs
    }

    pub fn probs(&self) -> Vec<f64> {
        self.log_probs.iter().map(|lp| lp.exp()).collect()
    }

    pub fn prob(&self, h: usize) -> f64 {
        self.log_probs[h].exp()
    }

    pub fn history(&self) -> &[Observation] {
        &self.history
    }

    fn normalize(&mut self) -> Result<()> {
        let max = self.log_probs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !max.is_finite() {
            return Err(Error::Internal("posterior has no finite mass".into()));
        }
        let sum: f64 = self.log_probs.iter().map(|lp| (lp - max).exp()).sum();
        let shift = max + sum.ln();
        for lp in &mut self.log_probs {
            *lp -= shift;
        }
        Ok(())
    }

    /// Multiplies hypotheses with `h(x, a) = +1` by `gamma_hat(x)` and the
    /// rest by `beta_hat(x)`.
    pub fn update_action(&mut self, space: &HypothesisSpace, x: usize, a: usize, noise: &NoiseModel) -> Result<()> {
        check_state(space, noise, x)?;
        if a >= space.num_actions() {
            return Err(Error::Argument(format!("action {a} out of range")));
        }
        let (lg, lb) = (noise.log_gamma[x], noise.log_beta[x]);
        for (lp, h) in self.log_probs.iter_mut().zip(space.hypotheses()) {
            *lp += if h.greedy_set(x).contains(a) { lg } else { lb };
        }
        self.normalize()?;
        self.history.push(Observation::Action { state: x, action: a });
        Ok(())
    }

    /// Adds `-(u - r_k(x))^2 / sigma_hat` for each hypothesis, using the
    /// state value of its source reward.
    pub fn update_reward(&mut self, space: &HypothesisSpace, x: usize, u: f64, noise: &NoiseModel) -> Result<()> {
        check_state(space, noise, x)?;
        if !space.has_rewards() {
            return Err(Error::Argument("space has no reward functions attached".into()));
        }
        if !u.is_finite() {
            return Err(Error::Argument(format!("observed reward {u} is not finite")));
        }
        let s = noise.sigma_hat;
        for (lp, r) in self.log_probs.iter_mut().zip(space.state_rewards(x)) {
            let d = u - r;
            *lp -= d * d / s;
        }
        self.normalize()?;
        self.history.push(Observation::Reward { state: x, value: u });
        Ok(())
    }

    pub fn apply(&mut self, space: &HypothesisSpace, obs: Observation, noise: &NoiseModel) -> Result<()> {
        match obs {
            Observation::Action { state, action } => self.update_action(space, state, action, noise),
            Observation::Reward { state, value } => self.update_reward(space, state, value, noise),
        }
    }

    pub fn snapshot(&self) -> PosteriorSnapshot {
        PosteriorSnapshot {
            format_version: SNAPSHOT_VERSION,
            probabilities: self.probs(),
            history: self.history.clone(),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.snapshot())?)
    }

    pub fn from_json(json: &str) -> Result<Self> {
        let snap: PosteriorSnapshot = serde_json::from_str(json)?;
        if snap.format_version != SNAPSHOT_VERSION {
            return Err(Error::Argument(format!(
                "unsupported snapshot version {}",
                snap.format_version
            )));
        }
        let mut post = Self::from_prior(&snap.probabilities)?;
        post.history = snap.history;
        Ok(post)
    }
}

fn check_state(space: &HypothesisSpace, noise: &NoiseModel, x: usize) -> Result<()> {
    if x >= space.num_states() || x >= noise.num_states() {
        return Err(Error::Argument(format!("state {x} out of range")));
    }
    Ok(())
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PosteriorSnapshot {
    pub format_version: u32,
    pub probabilities: Vec<f64>,
    pub history: Vec<Observation>,
}

/// `W(p, x)` and the predicted action `A*(p, x)` at one cell.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Prediction {
    pub w: f64,
    pub action: usize,
}

/// `sum_h p(h) h(x, a)` for every action at the representative of `cell`.
pub fn action_scores(post: &Posterior, space: &HypothesisSpace, cell: usize) -> Vec<f64> {
    action_scores_with(&post.probs(), space, cell)
}

fn action_scores_with(probs: &[f64], space: &HypothesisSpace, cell: usize) -> Vec<f64> {
    let mut plus = vec![0.0; space.num_actions()];
    let mut total = 0.0;
    for (&p, set) in probs.iter().zip(space.cell_labels(cell)) {
        total += p;
        for a in set.iter() {
            plus[a] += p;
        }
    }
    plus.iter().map(|m| 2.0 * m - total).collect()
}

fn argmax_first(values: &[f64]) -> (usize, f64) {
    let mut best = (0, values[0]);
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > best.1 {
            best = (i, v);
        }
    }
    best
}

pub fn weighted_prediction(post: &Posterior, space: &HypothesisSpace, cell: usize) -> Prediction {
    let (action, w) = argmax_first(&action_scores(post, space, cell));
    Prediction { w, action }
}

/// Predictions for every cell, in cell order.
pub fn weighted_predictions(post: &Posterior, space: &HypothesisSpace) -> Vec<Prediction> {
    let probs = post.probs();
    (0..space.num_cells())
        .map(|cell| {
            let (action, w) = argmax_first(&action_scores_with(&probs, space, cell));
            Prediction { w, action }
        })
        .collect()
}

/// `A_c(p, x) = {a : sum_h p(h) h(x, a) > c_hat}`; may be empty.
pub fn predicted_optimal_set(post: &Posterior, space: &HypothesisSpace, cell: usize, c_hat: f64) -> ActionSet {
    action_scores(post, space, cell)
        .iter()
        .enumerate()
        .filter(|&(_, &s)| s > c_hat)
        .map(|(a, _)| a)
        .collect()
}

/// Smallest index with maximal posterior probability.
pub fn map_hypothesis(post: &Posterior) -> usize {
    argmax_first(&post.log_probs).0
}

/// `C_t = (1 - p(h*)) / p(h*)`, or `+inf` when `p(h*) = 0`.
pub fn incorrect_mass_ratio(post: &Posterior, true_index: usize) -> f64 {
    let star = post.log_probs[true_index];
    if star == f64::NEG_INFINITY {
        return f64::INFINITY;
    }
    let others = post
        .log_probs
        .iter()
        .enumerate()
        .filter(|&(h, _)| h != true_index)
        .map(|(_, &lp)| lp - star);
    let max = others.clone().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return 0.0;
    }
    let sum: f64 = others.map(|d| (d - max).exp()).sum();
    (max + sum.ln()).exp()
}
