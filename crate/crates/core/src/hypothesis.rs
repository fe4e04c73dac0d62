//! Finite hypothesis spaces built from reward samples.
//!
//! Each reward `r_k` induces a hypothesis `h_k(x, a) = +1` when `a` is greedy
//! for `r_k` at `x` and `-1` otherwise. Hypotheses are stored as one
//! [`ActionSet`] per state. Rewards with identical labelings are merged and
//! their prior weights summed.

use std::collections::{HashMap, VecDeque};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::lp::{self, Constraint, Relation};
use crate::mdp::{greedy_sets, solve_q, ActionSet, Mdp, RewardFunction, DEFAULT_TOL, MAX_ACTIONS};

/// Default cap on `N * |H|` for the exact coherence computation.
pub const DEFAULT_COHERENCE_CAP: usize = 10_000_000;

/// Offset added to sparsity when deriving prior weights, so dense rewards
/// keep positive mass.
pub const PRIOR_SPARSITY_EPS: f64 = 1e-3;

#[derive(Clone, Debug, PartialEq)]
pub struct Hypothesis {
    labels: Vec<ActionSet>,
    source_reward: usize,
    members: Vec<usize>,
}

impl Hypothesis {
    /// `+1` if `a` is greedy at `x`, else `-1`.
    pub fn label(&self, x: usize, a: usize) -> i8 {
        if self.labels[x].contains(a) {
            1
        } else {
            -1
        }
    }

    /// The greedy set `A_h(x)`.
    pub fn greedy_set(&self, x: usize) -> ActionSet {
        self.labels[x]
    }

    pub fn labels(&self) -> &[ActionSet] {
        &self.labels
    }

    /// Index into the input reward list of the reward that represents this
    /// hypothesis (the smallest merged index).
    pub fn source_reward_index(&self) -> usize {
        self.source_reward
    }

    /// All input reward indices merged into this hypothesis, ascending.
    pub fn members(&self) -> &[usize] {
        &self.members
    }
}

/// States grouped into cells on which every hypothesis is constant.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Partition {
    cell_of_state: Vec<usize>,
    representatives: Vec<usize>,
}

impl Partition {
    pub fn cell_of_state(&self) -> &[usize] {
        &self.cell_of_state
    }

    pub fn cell(&self, x: usize) -> usize {
        self.cell_of_state[x]
    }

    /// Smallest state index of each cell; cells are numbered in order of
    /// their representatives.
    pub fn representatives(&self) -> &[usize] {
        &self.representatives
    }

    pub fn representative(&self, cell: usize) -> usize {
        self.representatives[cell]
    }

    pub fn num_cells(&self) -> usize {
        self.representatives.len()
    }

    pub fn states_in(&self, cell: usize) -> impl Iterator<Item = usize> + '_ {
        self.cell_of_state
            .iter()
            .enumerate()
            .filter(move |&(_, &c)| c == cell)
            .map(|(x, _)| x)
    }
}

/// Groups states whose label vectors agree under every hypothesis.
pub fn compute_partition(num_states: usize, hypotheses: &[Hypothesis]) -> Partition {
    let mut index: HashMap<Vec<ActionSet>, usize> = HashMap::new();
    let mut cell_of_state = Vec::with_capacity(num_states);
    let mut representatives = Vec::new();
    for x in 0..num_states {
        let column: Vec<ActionSet> = hypotheses.iter().map(|h| h.labels[x]).collect();
        let next = representatives.len();
        let cell = *index.entry(column).or_insert(next);
        if cell == next {
            representatives.push(x);
        }
        cell_of_state.push(cell);
    }
    Partition {
        cell_of_state,
        representatives,
    }
}

/// The hypothesis set `H` with its prior and state partition.
#[derive(Clone, Debug)]
pub struct HypothesisSpace {
    num_states: usize,
    num_actions: usize,
    hypotheses: Vec<Hypothesis>,
    prior: Vec<f64>,
    rewards: Vec<RewardFunction>,
    partition: Partition,
    // Greedy sets at cell representatives, laid out [cell][hypothesis].
    cell_labels: Vec<ActionSet>,
    // Reward state values, laid out [state][hypothesis]; empty without rewards.
    state_rewards: Vec<f64>,
}

fn state_reward_table(num_states: usize, rewards: &[RewardFunction]) -> Vec<f64> {
    if rewards.is_empty() {
        return Vec::new();
    }
    (0..num_states)
        .flat_map(|x| rewards.iter().map(move |r| r.state_value(x)))
        .collect()
}

/// Solves every reward, deduplicates the resulting labelings and renormalizes
/// the prior.
pub fn build_space(
    mdp: &Mdp,
    rewards: &[RewardFunction],
    prior_weights: &[f64],
    tie_tol: f64,
) -> Result<HypothesisSpace> {
    if rewards.is_empty() {
        return Err(Error::Argument("reward list is empty".into()));
    }
    if !(tie_tol >= 0.0) {
        return Err(Error::Argument(format!("tie tolerance {tie_tol} is negative")));
    }
    let labels: Vec<Vec<ActionSet>> = rewards
        .par_iter()
        .map(|r| solve_q(mdp, r, DEFAULT_TOL).map(|q| greedy_sets(&q, tie_tol)))
        .collect::<Result<_>>()?;
    HypothesisSpace::assemble(
        mdp.num_states(),
        mdp.num_actions(),
        labels,
        prior_weights,
        rewards.to_vec(),
    )
}

/// Prior weights proportional to sparsity, shifted by [`PRIOR_SPARSITY_EPS`].
pub fn sparsity_weights(rewards: &[RewardFunction]) -> Vec<f64> {
    rewards.iter().map(|r| r.sparsity() + PRIOR_SPARSITY_EPS).collect()
}

impl HypothesisSpace {
    /// Builds a space directly from labelings, one `Vec<ActionSet>` per
    /// hypothesis, without reward functions attached.
    pub fn from_labels(
        num_states: usize,
        num_actions: usize,
        labels: Vec<Vec<ActionSet>>,
        prior_weights: &[f64],
    ) -> Result<Self> {
        Self::assemble(num_states, num_actions, labels, prior_weights, Vec::new())
    }

    fn assemble(
        num_states: usize,
        num_actions: usize,
        labels: Vec<Vec<ActionSet>>,
        prior_weights: &[f64],
        rewards: Vec<RewardFunction>,
    ) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::Argument("no hypotheses".into()));
        }
        if prior_weights.len() != labels.len() {
            return Err(Error::Argument(format!(
                "{} prior weights for {} hypotheses",
                prior_weights.len(),
                labels.len()
            )));
        }
        if let Some(w) = prior_weights.iter().find(|&&w| !(w > 0.0) || !w.is_finite()) {
            return Err(Error::Argument(format!("prior weight {w} is not positive")));
        }
        if num_actions == 0 || num_actions > MAX_ACTIONS {
            return Err(Error::Argument(format!("unsupported action count {num_actions}")));
        }
        let full = ActionSet::from_bits(if num_actions == 32 {
            u32::MAX
        } else {
            (1 << num_actions) - 1
        });
        for (k, l) in labels.iter().enumerate() {
            if l.len() != num_states {
                return Err(Error::Argument(format!("hypothesis {k} has wrong length")));
            }
            if let Some(x) = l.iter().position(|s| s.is_empty() || s.bits() & !full.bits() != 0) {
                return Err(Error::Argument(format!(
                    "hypothesis {k} has an invalid greedy set at state {x}"
                )));
            }
        }

        let mut index: HashMap<&[ActionSet], usize> = HashMap::new();
        let mut hypotheses: Vec<Hypothesis> = Vec::new();
        let mut weights: Vec<f64> = Vec::new();
        for (k, l) in labels.iter().enumerate() {
            match index.get(l.as_slice()) {
                Some(&h) => {
                    hypotheses[h].members.push(k);
                    weights[h] += prior_weights[k];
                }
                None => {
                    index.insert(l.as_slice(), hypotheses.len());
                    hypotheses.push(Hypothesis {
                        labels: l.clone(),
                        source_reward: k,
                        members: vec![k],
                    });
                    weights.push(prior_weights[k]);
                }
            }
        }
        let total: f64 = weights.iter().sum();
        let prior: Vec<f64> = weights.iter().map(|w| w / total).collect();
        let rewards = if rewards.is_empty() {
            rewards
        } else {
            hypotheses.iter().map(|h| rewards[h.source_reward].clone()).collect()
        };
        Ok(Self::with_partition(
            num_states,
            num_actions,
            hypotheses,
            prior,
            rewards,
        ))
    }

    fn with_partition(
        num_states: usize,
        num_actions: usize,
        hypotheses: Vec<Hypothesis>,
        prior: Vec<f64>,
        rewards: Vec<RewardFunction>,
    ) -> Self {
        let partition = compute_partition(num_states, &hypotheses);
        let cell_labels = partition
            .representatives
            .iter()
            .flat_map(|&x| hypotheses.iter().map(move |h| h.labels[x]))
            .collect();
        let state_rewards = state_reward_table(num_states, &rewards);
        HypothesisSpace {
            num_states,
            num_actions,
            hypotheses,
            prior,
            rewards,
            partition,
            cell_labels,
            state_rewards,
        }
    }

    /// Reassembles a space from already-deduplicated parts (used by the cache).
    pub(crate) fn from_parts(
        num_states: usize,
        num_actions: usize,
        parts: Vec<(Vec<ActionSet>, usize, Vec<usize>)>,
        prior: Vec<f64>,
        pool: &[RewardFunction],
    ) -> Result<Self> {
        let hypotheses: Vec<Hypothesis> = parts
            .into_iter()
            .map(|(labels, source_reward, members)| Hypothesis {
                labels,
                source_reward,
                members,
            })
            .collect();
        let rewards = if pool.is_empty() {
            Vec::new()
        } else {
            hypotheses
                .iter()
                .map(|h| {
                    pool.get(h.source_reward)
                        .cloned()
                        .ok_or_else(|| Error::Argument(format!("source reward {} out of range", h.source_reward)))
                })
                .collect::<Result<_>>()?
        };
        Ok(Self::with_partition(
            num_states,
            num_actions,
            hypotheses,
            prior,
            rewards,
        ))
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn len(&self) -> usize {
        self.hypotheses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.hypotheses.is_empty()
    }

    pub fn hypotheses(&self) -> &[Hypothesis] {
        &self.hypotheses
    }

    pub fn hypothesis(&self, h: usize) -> &Hypothesis {
        &self.hypotheses[h]
    }

    pub fn prior(&self) -> &[f64] {
        &self.prior
    }

    /// Source reward of each hypothesis, or an empty slice for label-only
    /// spaces.
    pub fn rewards(&self) -> &[RewardFunction] {
        &self.rewards
    }

    pub fn has_rewards(&self) -> bool {
        !self.rewards.is_empty()
    }

    /// `r_h(x)` for every hypothesis `h`, in hypothesis order.
    pub fn state_rewards(&self, x: usize) -> &[f64] {
        let n = self.hypotheses.len();
        &self.state_rewards[x * n..(x + 1) * n]
    }

    pub fn partition(&self) -> &Partition {
        &self.partition
    }

    pub fn num_cells(&self) -> usize {
        self.partition.num_cells()
    }

    /// Greedy sets of every hypothesis at the representative of `cell`.
    pub fn cell_labels(&self, cell: usize) -> &[ActionSet] {
        let n = self.hypotheses.len();
        &self.cell_labels[cell * n..(cell + 1) * n]
    }

    /// Hypothesis that absorbed input reward `pool_index`.
    pub fn hypothesis_of_reward(&self, pool_index: usize) -> Option<usize> {
        self.hypotheses
            .iter()
            .position(|h| h.members.binary_search(&pool_index).is_ok())
    }

    /// Attaches one reward function per hypothesis, in hypothesis order.
    pub fn with_rewards(mut self, rewards: Vec<RewardFunction>) -> Result<Self> {
        if rewards.len() != self.hypotheses.len() {
            return Err(Error::Argument(format!(
                "{} rewards for {} hypotheses",
                rewards.len(),
                self.hypotheses.len()
            )));
        }
        if rewards.iter().any(|r| r.num_states() != self.num_states) {
            return Err(Error::Argument("reward state count does not match space".into()));
        }
        self.state_rewards = state_reward_table(self.num_states, &rewards);
        self.rewards = rewards;
        Ok(self)
    }

    /// Space restricted to a subset of hypotheses, prior renormalized.
    pub fn subspace(&self, keep: &[usize]) -> Result<Self> {
        if keep.is_empty() {
            return Err(Error::Argument("empty subspace".into()));
        }
        let hypotheses: Vec<Hypothesis> = keep.iter().map(|&h| self.hypotheses[h].clone()).collect();
        let total: f64 = keep.iter().map(|&h| self.prior[h]).sum();
        let prior = keep.iter().map(|&h| self.prior[h] / total).collect();
        let rewards = if self.rewards.is_empty() {
            Vec::new()
        } else {
            keep.iter().map(|&h| self.rewards[h].clone()).collect()
        };
        Ok(Self::with_partition(
            self.num_states,
            self.num_actions,
            hypotheses,
            prior,
            rewards,
        ))
    }
}

/// Cell pairs on which at most `k` hypotheses disagree about the greedy set.
#[derive(Clone, Debug)]
pub struct NeighborGraph {
    pub k: usize,
    num_cells: usize,
    edges: Vec<(usize, usize)>,
    disagreement_counts: Vec<usize>,
}

impl NeighborGraph {
    /// Edges `(i, j)` with `i < j`, in lexicographic order.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    /// Disagreement count of each edge, aligned with [`Self::edges`].
    pub fn disagreement_counts(&self) -> &[usize] {
        &self.disagreement_counts
    }

    pub fn num_cells(&self) -> usize {
        self.num_cells
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        let key = (i.min(j), i.max(j));
        self.edges.binary_search(&key).is_ok()
    }
}

pub fn neighbor_graph(space: &HypothesisSpace, k: usize) -> NeighborGraph {
    let n = space.num_cells();
    let mut edges = Vec::new();
    let mut disagreement_counts = Vec::new();
    for i in 0..n {
        let li = space.cell_labels(i);
        for j in i + 1..n {
            let lj = space.cell_labels(j);
            let mut count = 0;
            for (a, b) in li.iter().zip(lj) {
                if a != b {
                    count += 1;
                    if count > k {
                        break;
                    }
                }
            }
            if count <= k {
                edges.push((i, j));
                disagreement_counts.push(count);
            }
        }
    }
    NeighborGraph {
        k,
        num_cells: n,
        edges,
        disagreement_counts,
    }
}

/// True iff the neighbor graph is connected.
pub fn is_k_neighborly(graph: &NeighborGraph) -> bool {
    let n = graph.num_cells;
    if n <= 1 {
        return true;
    }
    let mut adjacency = vec![Vec::new(); n];
    for &(i, j) in &graph.edges {
        adjacency[i].push(j);
        adjacency[j].push(i);
    }
    let mut seen = vec![false; n];
    let mut queue = VecDeque::from([0]);
    seen[0] = true;
    let mut reached = 1;
    while let Some(i) = queue.pop_front() {
        for &j in &adjacency[i] {
            if !seen[j] {
                seen[j] = true;
                reached += 1;
                queue.push_back(j);
            }
        }
    }
    reached == n
}

/// Solution of the inner min-max problem for one action.
#[derive(Clone, Debug)]
pub struct ActionCoherence {
    pub value: f64,
    /// Minimizing probability measure over cells.
    pub measure: Vec<f64>,
}

/// `min_mu max_h sum_i h([x]_i, a) mu_i` for a single action, as an LP over
/// the cell simplex.
pub fn action_coherence(space: &HypothesisSpace, a: usize) -> Result<ActionCoherence> {
    let n = space.num_cells();
    // Distinct label columns only; duplicate rows do not change the LP.
    let mut rows: Vec<Vec<i8>> = (0..space.len())
        .map(|h| {
            (0..n)
                .map(|i| if space.cell_labels(i)[h].contains(a) { 1 } else { -1 })
                .collect()
        })
        .collect();
    rows.sort();
    rows.dedup();

    // Variables: mu_1..mu_N and s = t + 1 >= 0. Minimize s subject to
    // s - sum_i h_i mu_i >= 1 for each h and sum_i mu_i = 1.
    let mut constraints: Vec<Constraint> = rows
        .iter()
        .map(|row| {
            let mut coeffs: Vec<f64> = row.iter().map(|&v| -f64::from(v)).collect();
            coeffs.push(1.0);
            Constraint {
                coeffs,
                relation: Relation::Ge,
                rhs: 1.0,
            }
        })
        .collect();
    let mut simplex_row = vec![1.0; n];
    simplex_row.push(0.0);
    constraints.push(Constraint {
        coeffs: simplex_row,
        relation: Relation::Eq,
        rhs: 1.0,
    });
    let mut objective = vec![0.0; n];
    objective.push(1.0);
    let sol = lp::minimize(&objective, &constraints)?;
    Ok(ActionCoherence {
        value: (sol.objective - 1.0).clamp(-1.0, 1.0),
        measure: sol.x[..n].to_vec(),
    })
}

/// The coherence parameter `c* = max_a min_mu max_h sum_i h([x]_i, a) mu(X_i)`.
pub fn coherence_parameter(space: &HypothesisSpace) -> Result<f64> {
    coherence_parameter_capped(space, DEFAULT_COHERENCE_CAP)
}

pub fn coherence_parameter_capped(space: &HypothesisSpace, cap: usize) -> Result<f64> {
    let size = space.num_cells() * space.len();
    if size > cap {
        return Err(Error::Capacity(format!(
            "coherence LP with N * |H| = {size} exceeds cap {cap}; \
             reduce the pool size, or use gbs-v2, which does not need c*"
        )));
    }
    let mut best = f64::NEG_INFINITY;
    for a in 0..space.num_actions() {
        best = best.max(action_coherence(space, a)?.value);
    }
    Ok(best)
}
