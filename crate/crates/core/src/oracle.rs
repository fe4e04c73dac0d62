//! Simulated expert answering action and reward queries.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::mdp::{greedy_sets, solve_q, ActionSet, Mdp, RewardFunction, DEFAULT_TOL};

const NORMALIZE_TOL: f64 = 1e-9;

/// RNG stream used by oracles, kept apart from strategy randomness.
pub const ORACLE_STREAM: u64 = 1;

/// How the expert's action noise is specified.
#[derive(Clone, Debug, PartialEq)]
pub enum OracleNoise {
    /// Total probability `m` on the optimal set, spread evenly over it;
    /// the rest spread evenly over the other actions.
    OptimalMass(f64),
    /// Probability `beta` for every non-optimal action; optimal actions share
    /// the remainder.
    WrongAction(f64),
    /// Explicit per-state per-action probabilities.
    Explicit { beta: Vec<f64>, gamma: Vec<f64> },
}

#[derive(Clone, Debug)]
pub struct ExpertOracle {
    num_actions: usize,
    true_reward: Option<RewardFunction>,
    optimal_sets: Vec<ActionSet>,
    beta_star: Vec<f64>,
    gamma_star: Vec<f64>,
    alpha: f64,
    sigma: f64,
    reward_noise: Option<Normal<f64>>,
    rng: ChaCha8Rng,
}

impl ExpertOracle {
    /// Oracle whose optimal sets come from solving `true_reward` on `mdp`.
    pub fn new(
        mdp: &Mdp,
        true_reward: RewardFunction,
        tie_tol: f64,
        noise: OracleNoise,
        sigma: f64,
        seed: u64,
    ) -> Result<Self> {
        let q = solve_q(mdp, &true_reward, DEFAULT_TOL)?;
        let sets = greedy_sets(&q, tie_tol);
        Self::from_optimal_sets(mdp.num_actions(), sets, Some(true_reward), noise, sigma, seed)
    }

    pub fn from_optimal_sets(
        num_actions: usize,
        optimal_sets: Vec<ActionSet>,
        true_reward: Option<RewardFunction>,
        noise: OracleNoise,
        sigma: f64,
        seed: u64,
    ) -> Result<Self> {
        let n = optimal_sets.len();
        let na = num_actions as f64;
        if let Some(x) = optimal_sets
            .iter()
            .position(|s| s.is_empty() || s.iter().any(|a| a >= num_actions))
        {
            return Err(Error::Argument(format!("invalid optimal set at state {x}")));
        }
        let (beta_star, gamma_star): (Vec<f64>, Vec<f64>) = match noise {
            OracleNoise::OptimalMass(m) => optimal_sets
                .iter()
                .map(|s| {
                    let k = s.len() as f64;
                    let off = na - k;
                    if off == 0.0 {
                        (0.0, 1.0 / k)
                    } else {
                        ((1.0 - m) / off, m / k)
                    }
                })
                .unzip(),
            OracleNoise::WrongAction(b) => optimal_sets
                .iter()
                .map(|s| {
                    let k = s.len() as f64;
                    (b, (1.0 - (na - k) * b) / k)
                })
                .unzip(),
            OracleNoise::Explicit { beta, gamma } => {
                if beta.len() != n || gamma.len() != n {
                    return Err(Error::Argument("noise vectors do not match state count".into()));
                }
                (beta, gamma)
            }
        };
        for x in 0..n {
            let (b, g) = (beta_star[x], gamma_star[x]);
            if !(0.0..=1.0).contains(&b) || !(0.0..=1.0).contains(&g) {
                return Err(Error::Argument(format!(
                    "oracle probabilities at state {x} outside [0, 1]"
                )));
            }
            let k = optimal_sets[x].len() as f64;
            let total = k * g + (na - k) * b;
            if (total - 1.0).abs() > NORMALIZE_TOL {
                return Err(Error::Argument(format!(
                    "oracle probabilities at state {x} sum to {total}"
                )));
            }
            if b > g {
                return Err(Error::Argument(format!("beta*({x}) = {b} exceeds gamma*({x}) = {g}")));
            }
        }
        if !(sigma >= 0.0) || !sigma.is_finite() {
            return Err(Error::Argument(format!("sigma {sigma} must be non-negative")));
        }
        let reward_noise = if sigma > 0.0 {
            Some(Normal::new(0.0, (sigma / 2.0).sqrt()).map_err(|e| Error::Argument(e.to_string()))?)
        } else {
            None
        };
        let alpha = beta_star.iter().copied().fold(0.0, f64::max);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(ORACLE_STREAM);
        Ok(ExpertOracle {
            num_actions,
            true_reward,
            optimal_sets,
            beta_star,
            gamma_star,
            alpha,
            sigma,
            reward_noise,
            rng,
        })
    }

    pub fn num_states(&self) -> usize {
        self.optimal_sets.len()
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn optimal_set(&self, x: usize) -> ActionSet {
        self.optimal_sets[x]
    }

    pub fn optimal_sets(&self) -> &[ActionSet] {
        &self.optimal_sets
    }

    pub fn true_reward(&self) -> Option<&RewardFunction> {
        self.true_reward.as_ref()
    }

    /// Per-action probability of each non-optimal action.
    pub fn beta_star(&self) -> &[f64] {
        &self.beta_star
    }

    /// Per-action probability of each optimal action.
    pub fn gamma_star(&self) -> &[f64] {
        &self.gamma_star
    }

    /// Total probability of answering outside the optimal set at `x`.
    pub fn aggregated_beta(&self, x: usize) -> f64 {
        1.0 - self.aggregated_gamma(x)
    }

    /// Total probability of answering inside the optimal set at `x`.
    pub fn aggregated_gamma(&self, x: usize) -> f64 {
        self.optimal_sets[x].len() as f64 * self.gamma_star[x]
    }

    /// `sup_x beta*(x)`.
    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn action_probability(&self, x: usize, a: usize) -> f64 {
        if self.optimal_sets[x].contains(a) {
            self.gamma_star[x]
        } else {
            self.beta_star[x]
        }
    }

    pub fn sample_action(&mut self, x: usize) -> usize {
        let u: f64 = self.rng.random();
        let mut acc = 0.0;
        for a in 0..self.num_actions {
            acc += self.action_probability(x, a);
            if u < acc {
                return a;
            }
        }
        // Rounding left a sliver of mass; give it to the last optimal action.
        self.optimal_sets[x].iter().last().unwrap_or(self.num_actions - 1)
    }

    /// `r*(x)` plus Gaussian noise of variance `sigma / 2`.
    pub fn sample_reward(&mut self, x: usize) -> Result<f64> {
        let r = self
            .true_reward
            .as_ref()
            .ok_or_else(|| Error::Precondition("oracle has no reward function".into()))?
            .state_value(x);
        Ok(match &self.reward_noise {
            Some(d) => r + d.sample(&mut self.rng),
            None => r,
        })
    }
}
