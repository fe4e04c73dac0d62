//! Unstructured random MDPs and distractor reward pools.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};

use crate::error::{Error, Result};
use crate::mdp::{Mdp, RewardFunction};

pub const RANDOM_DISCOUNT: f64 = 0.95;

/// Transition rows drawn from a symmetric Dirichlet(1), via normalized
/// exponential samples.
pub fn random_mdp(num_states: usize, num_actions: usize, seed: u64) -> Result<Mdp> {
    if num_states == 0 || num_actions == 0 {
        return Err(Error::Argument("random MDP needs at least one state and action".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut kernel = Vec::with_capacity(num_actions * num_states * num_states);
    for _ in 0..num_actions * num_states {
        let row: Vec<f64> = (0..num_states).map(|_| Exp1.sample(&mut rng)).collect();
        let total: f64 = row.iter().sum();
        kernel.extend(row.iter().map(|v| v / total));
    }
    Mdp::from_dense(num_states, num_actions, kernel, RANDOM_DISCOUNT)
}

/// State reward where each state is nonzero with probability 1/2 (at least
/// one state always is), values uniform in `[-1, 1]`.
pub fn random_sparse_reward(num_states: usize, num_actions: usize, seed: u64) -> Result<RewardFunction> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut values: Vec<f64> = (0..num_states)
        .map(|_| {
            if rng.random_bool(0.5) {
                rng.random_range(-1.0..=1.0)
            } else {
                0.0
            }
        })
        .collect();
    if values.iter().all(|&v| v == 0.0) {
        let x = rng.random_range(0..num_states);
        values[x] = rng.random_range(-1.0..=1.0);
    }
    RewardFunction::from_state(&values, num_actions)
}

/// `count` rewards with `pool[0] == true_reward`. Each distractor has the
/// same number of nonzero entries at uniform positions, with values uniform
/// over the range of the true reward's nonzeros.
pub fn random_reward_pool(true_reward: &RewardFunction, count: usize, seed: u64) -> Result<Vec<RewardFunction>> {
    if count == 0 {
        return Err(Error::Argument("reward pool must be non-empty".into()));
    }
    let ns = true_reward.num_states();
    let na = true_reward.num_actions();
    let state_only = true_reward.is_state_only();
    let entries: Vec<f64> = if state_only {
        (0..ns).map(|x| true_reward.get(x, 0)).collect()
    } else {
        true_reward.values().to_vec()
    };
    let nonzero: Vec<f64> = entries.iter().copied().filter(|&v| v != 0.0).collect();
    let lo = nonzero.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = nonzero.iter().copied().fold(f64::NEG_INFINITY, f64::max);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pool = Vec::with_capacity(count);
    pool.push(true_reward.clone());
    for _ in 1..count {
        let mut values = vec![0.0; entries.len()];
        for i in sample(&mut rng, entries.len(), nonzero.len()) {
            values[i] = if hi > lo { rng.random_range(lo..=hi) } else { lo };
        }
        pool.push(if state_only {
            RewardFunction::from_state(&values, na)?
        } else {
            RewardFunction::from_state_action(ns, na, values)?
        });
    }
    Ok(pool)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rows_are_distributions() {
        let mdp = random_mdp(10, 5, 3).unwrap();
        for a in 0..5 {
            for x in 0..10 {
                let total: f64 = mdp.row(a, x).map(|(_, p)| p).sum();
                assert!((total - 1.0).abs() < 1e-12);
            }
        }
        assert_eq!(mdp.discount(), 0.95);
    }

    #[test]
    fn seeded_construction_is_reproducible() {
        let a = random_mdp(6, 3, 11).unwrap();
        let b = random_mdp(6, 3, 11).unwrap();
        for x in 0..6 {
            for y in 0..6 {
                assert_eq!(a.transition(2, x, y), b.transition(2, x, y));
            }
        }
    }

    #[test]
    fn pool_matches_sparsity() {
        let r = random_sparse_reward(10, 5, 4).unwrap();
        let pool = random_reward_pool(&r, 500, 5).unwrap();
        assert_eq!(pool.len(), 500);
        assert_eq!(pool[0], r);
        let count = |r: &RewardFunction| (0..10).filter(|&x| r.get(x, 0) != 0.0).count();
        let k = count(&r);
        assert!(k >= 1);
        assert!(pool.iter().all(|d| count(d) == k && d.is_state_only()));
    }
}
