//! Experimental domains and a name-based registry.

pub mod driver;
pub mod grid;
pub mod puddle;
pub mod random;
pub mod trap;

use crate::error::{Error, Result};
use crate::mdp::{Mdp, RewardFunction};

pub use random::{random_mdp, random_reward_pool, random_sparse_reward};

/// Default number of rewards in a hypothesis pool.
pub const DEFAULT_POOL_SIZE: usize = 500;

/// How distractor rewards for a domain are generated.
#[derive(Clone, Debug, PartialEq)]
pub struct RewardPoolConfig {
    pub count: usize,
    /// Number of nonzero entries each distractor carries.
    pub sparsity: usize,
    pub value_range: (f64, f64),
    pub seed: u64,
}

#[derive(Clone, Debug)]
pub struct DomainSpec {
    pub name: String,
    pub mdp: Mdp,
    pub true_reward: RewardFunction,
    pub reward_pool_config: RewardPoolConfig,
}

impl DomainSpec {
    fn new(name: &str, mdp: Mdp, true_reward: RewardFunction) -> Self {
        let entries: Vec<f64> = if true_reward.is_state_only() {
            (0..true_reward.num_states()).map(|x| true_reward.get(x, 0)).collect()
        } else {
            true_reward.values().to_vec()
        };
        let nonzero: Vec<f64> = entries.into_iter().filter(|&v| v != 0.0).collect();
        let lo = nonzero.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = nonzero.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        DomainSpec {
            name: name.to_string(),
            mdp,
            true_reward,
            reward_pool_config: RewardPoolConfig {
                count: DEFAULT_POOL_SIZE,
                sparsity: nonzero.len(),
                value_range: (lo.min(hi), hi.max(lo)),
                seed: 0,
            },
        }
    }

    /// The reward pool, true reward first.
    pub fn reward_pool(&self, count: usize, seed: u64) -> Result<Vec<RewardFunction>> {
        random_reward_pool(&self.true_reward, count, seed)
    }
}

pub fn puddle_world() -> Result<DomainSpec> {
    Ok(DomainSpec::new(
        "puddle",
        puddle::puddle_mdp()?,
        puddle::puddle_reward()?,
    ))
}

pub fn trap_world() -> Result<DomainSpec> {
    trap_world_from(&trap::default_layout())
}

pub fn trap_world_from(layout: &trap::TrapLayout) -> Result<DomainSpec> {
    Ok(DomainSpec::new("trap", layout.mdp()?, layout.reward()?))
}

pub fn driver_world() -> Result<DomainSpec> {
    Ok(DomainSpec::new(
        "driver",
        driver::driver_mdp()?,
        driver::driver_reward()?,
    ))
}

pub fn grid_world_19x10(shaped: bool) -> Result<DomainSpec> {
    let (name, reward) = if shaped {
        ("grid19x10-shaped", grid::shaped_reward()?)
    } else {
        ("grid19x10-sparse", grid::sparse_reward()?)
    };
    Ok(DomainSpec::new(name, grid::grid_mdp()?, reward))
}

/// Random MDP with a random sparse state reward. The reward uses a seed
/// derived from `seed` so MDP and reward streams differ.
pub fn random_domain(num_states: usize, num_actions: usize, seed: u64) -> Result<DomainSpec> {
    let mdp = random_mdp(num_states, num_actions, seed)?;
    let reward = random_sparse_reward(num_states, num_actions, seed.wrapping_add(0x9e37_79b9_7f4a_7c15))?;
    Ok(DomainSpec::new(
        &format!("random-{num_states}x{num_actions}"),
        mdp,
        reward,
    ))
}

/// Names accepted by [`domain`]. `random-<S>x<A>` accepts any sizes.
pub fn list_domains() -> Vec<&'static str> {
    vec![
        "random-10x5",
        "random-10x10",
        "random-50x5",
        "puddle",
        "trap",
        "driver",
        "grid19x10-sparse",
        "grid19x10-shaped",
    ]
}

/// Looks up a domain by name; `seed` only affects random domains.
pub fn domain(name: &str, seed: u64) -> Result<DomainSpec> {
    match name {
        "puddle" => puddle_world(),
        "trap" => trap_world(),
        "driver" => driver_world(),
        "grid19x10-sparse" => grid_world_19x10(false),
        "grid19x10-shaped" => grid_world_19x10(true),
        _ => {
            let sizes = name
                .strip_prefix("random-")
                .and_then(|s| s.split_once('x'))
                .and_then(|(s, a)| Some((s.parse::<usize>().ok()?, a.parse::<usize>().ok()?)));
            match sizes {
                Some((s, a)) => random_domain(s, a, seed),
                None => Err(Error::Argument(format!(
                    "unknown domain '{name}' (known: {})",
                    list_domains().join(", ")
                ))),
            }
        }
    }
}
