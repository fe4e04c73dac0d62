//! Query selection rules and the convergence-bound calculator.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::bayes::{map_hypothesis, weighted_predictions, NoiseMode, NoiseModel, Posterior, Prediction};
use crate::error::{Error, Result};
use crate::hypothesis::{coherence_parameter, HypothesisSpace, NeighborGraph};
use crate::oracle::ExpertOracle;

/// Margin used for the strict `W > c_t` test in version 1.
pub const PAIR_MARGIN: f64 = 1e-12;

const FISHER_EPS: f64 = 1e-9;

/// Values of epsilon at or below this are treated as zero (rounding of an
/// exact cancellation).
const EPSILON_FLOOR: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StrategyKind {
    GbsV1,
    GbsV2,
    GbsV3,
    Random,
    Iqbc,
    Emg,
}

impl StrategyKind {
    pub fn name(self) -> &'static str {
        match self {
            StrategyKind::GbsV1 => "gbs-v1",
            StrategyKind::GbsV2 => "gbs-v2",
            StrategyKind::GbsV3 => "gbs-v3",
            StrategyKind::Random => "random",
            StrategyKind::Iqbc => "iqbc",
            StrategyKind::Emg => "emg",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StrategyConfig {
    pub kind: StrategyKind,
    pub c_hat: Option<f64>,
    pub rng_seed: u64,
    /// Weight IQBC vote counts by the posterior.
    pub iqbc_weighted: bool,
}

impl StrategyConfig {
    pub fn new(kind: StrategyKind, rng_seed: u64) -> Self {
        StrategyConfig {
            kind,
            c_hat: None,
            rng_seed,
            iqbc_weighted: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.kind == StrategyKind::GbsV3 {
            match self.c_hat {
                Some(c) if c > 0.0 && c < 1.0 => {}
                Some(c) => return Err(Error::Config(format!("c_hat {c} must lie in (0, 1)"))),
                None => return Err(Error::Config("gbs-v3 requires c_hat".into())),
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum QueryDecision {
    Query(usize),
    Stop(usize),
}

fn argmin_w(preds: &[Prediction]) -> usize {
    let mut best = 0;
    for (i, p) in preds.iter().enumerate().skip(1) {
        if p.w < preds[best].w {
            best = i;
        }
    }
    best
}

/// First edge `(i, j)` of the 1-neighbor graph, in lexicographic order, with
/// `W > c_t` at both ends and different predicted actions.
pub fn qualifying_pair(preds: &[Prediction], graph: &NeighborGraph, c_t: f64) -> Option<(usize, usize)> {
    graph.edges().iter().copied().find(|&(i, j)| {
        preds[i].w > c_t + PAIR_MARGIN && preds[j].w > c_t + PAIR_MARGIN && preds[i].action != preds[j].action
    })
}

pub fn select_query_v1<R: Rng + ?Sized>(
    post: &Posterior,
    space: &HypothesisSpace,
    graph: &NeighborGraph,
    rng: &mut R,
) -> usize {
    let preds = weighted_predictions(post, space);
    let c_t = preds.iter().map(|p| p.w).fold(f64::INFINITY, f64::min);
    match qualifying_pair(&preds, graph, c_t) {
        Some((i, j)) => {
            if rng.random_bool(0.5) {
                i
            } else {
                j
            }
        }
        None => argmin_w(&preds),
    }
}

pub fn select_query_v2(post: &Posterior, space: &HypothesisSpace) -> usize {
    argmin_w(&weighted_predictions(post, space))
}

pub fn select_query_v3(post: &Posterior, space: &HypothesisSpace, c_hat: f64) -> QueryDecision {
    let preds = weighted_predictions(post, space);
    let i = argmin_w(&preds);
    if preds[i].w >= c_hat {
        QueryDecision::Stop(map_hypothesis(post))
    } else {
        QueryDecision::Query(i)
    }
}

pub fn select_query_random<R: Rng + ?Sized>(space: &HypothesisSpace, rng: &mut R) -> usize {
    rng.random_range(0..space.num_cells())
}

/// Vote entropy of each cell. With `weighted`, vote counts are posterior
/// masses; otherwise raw counts over `|H|`.
pub fn vote_entropies(post: &Posterior, space: &HypothesisSpace, weighted: bool) -> Vec<f64> {
    let probs = post.probs();
    let uniform = 1.0 / space.len() as f64;
    (0..space.num_cells())
        .map(|cell| {
            let mut votes = vec![0.0; space.num_actions()];
            for (h, set) in space.cell_labels(cell).iter().enumerate() {
                let w = if weighted { probs[h] } else { uniform };
                for a in set.iter() {
                    votes[a] += w;
                }
            }
            votes.iter().filter(|&&q| q > 0.0).map(|&q| -q * q.ln()).sum()
        })
        .collect()
}

pub fn select_query_iqbc(post: &Posterior, space: &HypothesisSpace, weighted: bool) -> usize {
    let ve = vote_entropies(post, space, weighted);
    let mut best = 0;
    for (i, &v) in ve.iter().enumerate().skip(1) {
        if v > ve[best] {
            best = i;
        }
    }
    best
}

/// Expected myopic gain selection is not provided.
pub fn select_query_emg(_post: &Posterior, _space: &HypothesisSpace) -> Result<usize> {
    Err(Error::NotImplemented("expected myopic gain query selection"))
}

/// State whose reward best separates the hypotheses grouped by their greedy
/// action at the least certain cell.
pub fn select_reward_query(post: &Posterior, space: &HypothesisSpace) -> Result<usize> {
    let cell = select_query_v2(post, space);
    select_reward_query_at(post, space, space.partition().representative(cell))
}

/// Like [`select_reward_query`] with an explicit anchor state.
pub fn select_reward_query_at(post: &Posterior, space: &HypothesisSpace, anchor: usize) -> Result<usize> {
    if !space.has_rewards() {
        return Err(Error::Argument("space has no reward functions attached".into()));
    }
    if anchor >= space.num_states() {
        return Err(Error::Argument(format!("anchor state {anchor} out of range")));
    }
    let probs = post.probs();
    let na = space.num_actions();
    let group: Vec<usize> = space
        .hypotheses()
        .iter()
        .map(|h| h.greedy_set(anchor).first().unwrap_or(0))
        .collect();
    let mut mass = vec![0.0; na];
    let mut present = vec![false; na];
    for (h, &g) in group.iter().enumerate() {
        mass[g] += probs[h];
        present[g] = true;
    }
    if present.iter().filter(|&&p| p).count() < 2 {
        return Ok(anchor);
    }
    let total: f64 = mass.iter().sum();
    let mut best = (anchor, 0.0);
    let mut sums = vec![0.0; na];
    let mut means = vec![0.0; na];
    for s in 0..space.num_states() {
        let values = space.state_rewards(s);
        sums.iter_mut().for_each(|v| *v = 0.0);
        let mut overall = 0.0;
        for ((&p, &g), &r) in probs.iter().zip(&group).zip(values) {
            let v = p * r;
            sums[g] += v;
            overall += v;
        }
        let overall = overall / total;
        for ((mu, s), &m) in means.iter_mut().zip(&sums).zip(&mass) {
            *mu = if m > 0.0 { s / m } else { 0.0 };
        }
        let between: f64 = mass.iter().zip(&means).map(|(m, mu)| m * (mu - overall).powi(2)).sum();
        let within: f64 = probs
            .iter()
            .zip(&group)
            .zip(values)
            .map(|((&p, &g), &r)| p * (r - means[g]).powi(2))
            .sum();
        let score = between / (within + FISHER_EPS);
        if score > best.1 {
            best = (s, score);
        }
    }
    Ok(best.0)
}

/// Quantities of the convergence-rate bound.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundParams {
    pub epsilon: f64,
    pub c_star: f64,
    pub lambda: f64,
    pub h_size: usize,
    pub delta: f64,
    /// Query budget `ceil(ln(|H| / delta) / lambda)`; `None` when vacuous.
    pub t_min: Option<u64>,
    /// True when `lambda <= 0`, so the bound says nothing.
    pub vacuous: bool,
}

impl BoundParams {
    pub fn from_parts(epsilon: f64, c_star: f64, h_size: usize, delta: f64) -> Result<Self> {
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::Argument(format!("delta {delta} must lie in (0, 1)")));
        }
        if h_size == 0 {
            return Err(Error::Argument("empty hypothesis space".into()));
        }
        if !(-1.0..=1.0).contains(&c_star) {
            return Err(Error::Argument(format!("c* = {c_star} outside [-1, 1]")));
        }
        let lambda = if epsilon > EPSILON_FLOOR {
            epsilon * ((1.0 - c_star) / 2.0).min(0.25)
        } else {
            0.0
        };
        let vacuous = !(lambda > 0.0);
        let t_min = if vacuous {
            None
        } else {
            Some(((h_size as f64 / delta).ln() / lambda).ceil().max(0.0) as u64)
        };
        Ok(BoundParams {
            epsilon,
            c_star,
            lambda,
            h_size,
            delta,
            t_min,
            vacuous,
        })
    }

    /// `|H| (1 - lambda)^t`, capped at one.
    pub fn error_bound(&self, t: usize) -> f64 {
        (self.h_size as f64 * (1.0 - self.lambda).powi(t as i32)).min(1.0)
    }
}

/// `min_x [gamma*(gamma_hat - beta_hat)/gamma_hat + beta*(beta_hat - gamma_hat)/beta_hat]`,
/// with the oracle's noise read in the same mode as `noise`.
pub fn noise_epsilon(noise: &NoiseModel, oracle: &ExpertOracle) -> Result<f64> {
    if noise.num_states() != oracle.num_states() {
        return Err(Error::Argument("noise model and oracle disagree on state count".into()));
    }
    let n = oracle.num_states();
    let (beta, gamma): (Vec<f64>, Vec<f64>) = match noise.mode() {
        NoiseMode::PerAction => (oracle.beta_star().to_vec(), oracle.gamma_star().to_vec()),
        NoiseMode::Aggregated => (0..n)
            .map(|x| (oracle.aggregated_beta(x), oracle.aggregated_gamma(x)))
            .unzip(),
    };
    let alpha = beta.iter().copied().fold(0.0, f64::max);
    let mut eps = f64::INFINITY;
    for x in 0..n {
        let (bh, gh) = (noise.beta_hat()[x], noise.gamma_hat()[x]);
        if bh < alpha {
            return Err(Error::Precondition(format!(
                "beta_hat({x}) = {bh} is below the oracle noise level {alpha}"
            )));
        }
        eps = eps.min(gamma[x] * (gh - bh) / gh + beta[x] * (bh - gh) / bh);
    }
    Ok(eps)
}

pub fn compute_bound(
    space: &HypothesisSpace,
    noise: &NoiseModel,
    oracle: &ExpertOracle,
    delta: f64,
) -> Result<BoundParams> {
    let eps = noise_epsilon(noise, oracle)?;
    let c_star = coherence_parameter(space)?;
    let params = BoundParams::from_parts(eps, c_star, space.len(), delta)?;
    if params.vacuous {
        log::warn!("convergence bound is vacuous (epsilon = {eps}, c* = {c_star})");
    }
    Ok(params)
}
