//! Finite MDPs and exact dynamic-programming solvers.
//!
//! Transition kernels are indexed `[action][state][next_state]`. Kernels whose
//! density falls below [`SPARSE_DENSITY_THRESHOLD`] are stored row-compressed.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_TOL: f64 = 1e-8;
pub const DEFAULT_TIE_TOL: f64 = 1e-6;

/// Action sets are bitmasks, so action spaces are capped at this size.
pub const MAX_ACTIONS: usize = 32;

const ROW_SUM_TOL: f64 = 1e-9;
const SPARSE_DENSITY_THRESHOLD: f64 = 0.25;
const MAX_ITERATIONS: usize = 2_000_000;

/// A subset of the action space.
#[derive(Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ActionSet(u32);

impl ActionSet {
    pub const EMPTY: ActionSet = ActionSet(0);

    pub fn from_bits(bits: u32) -> Self {
        ActionSet(bits)
    }

    pub fn singleton(a: usize) -> Self {
        ActionSet(1 << a)
    }

    pub fn bits(self) -> u32 {
        self.0
    }

    pub fn insert(&mut self, a: usize) {
        self.0 |= 1 << a;
    }

    pub fn contains(self, a: usize) -> bool {
        a < MAX_ACTIONS && self.0 & (1 << a) != 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn intersects(self, other: ActionSet) -> bool {
        self.0 & other.0 != 0
    }

    /// Smallest action in the set.
    pub fn first(self) -> Option<usize> {
        if self.0 == 0 {
            None
        } else {
            Some(self.0.trailing_zeros() as usize)
        }
    }

    pub fn iter(self) -> impl Iterator<Item = usize> {
        let mut bits = self.0;
        std::iter::from_fn(move || {
            if bits == 0 {
                return None;
            }
            let a = bits.trailing_zeros() as usize;
            bits &= bits - 1;
            Some(a)
        })
    }
}

impl FromIterator<usize> for ActionSet {
    fn from_iter<I: IntoIterator<Item = usize>>(iter: I) -> Self {
        let mut set = ActionSet::EMPTY;
        for a in iter {
            set.insert(a);
        }
        set
    }
}

impl fmt::Debug for ActionSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter()).finish()
    }
}

#[derive(Clone, Debug)]
enum Transitions {
    Dense(Vec<f64>),
    Sparse {
        row_ptr: Vec<usize>,
        cols: Vec<usize>,
        vals: Vec<f64>,
    },
}

/// A finite MDP without its reward: states, actions, kernel and discount.
#[derive(Clone, Debug)]
pub struct Mdp {
    num_states: usize,
    num_actions: usize,
    discount: f64,
    transitions: Transitions,
}

impl Mdp {
    /// Builds an MDP from a dense kernel laid out as `[a][x][y]`.
    ///
    /// The kernel is converted to compressed rows when fewer than a quarter of
    /// its entries are nonzero.
    pub fn from_dense(num_states: usize, num_actions: usize, kernel: Vec<f64>, discount: f64) -> Result<Self> {
        check_sizes(num_states, num_actions, discount)?;
        if kernel.len() != num_actions * num_states * num_states {
            return Err(Error::Model(format!(
                "kernel has {} entries, expected {}",
                kernel.len(),
                num_actions * num_states * num_states
            )));
        }
        let nnz = kernel.iter().filter(|&&p| p != 0.0).count();
        let density = nnz as f64 / kernel.len() as f64;
        let transitions = if density < SPARSE_DENSITY_THRESHOLD {
            let mut row_ptr = Vec::with_capacity(num_actions * num_states + 1);
            let mut cols = Vec::with_capacity(nnz);
            let mut vals = Vec::with_capacity(nnz);
            row_ptr.push(0);
            for row in kernel.chunks(num_states) {
                for (y, &p) in row.iter().enumerate() {
                    if p != 0.0 {
                        cols.push(y);
                        vals.push(p);
                    }
                }
                row_ptr.push(cols.len());
            }
            Transitions::Sparse { row_ptr, cols, vals }
        } else {
            Transitions::Dense(kernel)
        };
        let mdp = Mdp {
            num_states,
            num_actions,
            discount,
            transitions,
        };
        mdp.validate()?;
        Ok(mdp)
    }

    /// Builds an MDP from explicit sparse rows, one per `(a, x)` in
    /// `a * num_states + x` order. Duplicate targets within a row are summed.
    pub fn from_rows(
        num_states: usize,
        num_actions: usize,
        rows: Vec<Vec<(usize, f64)>>,
        discount: f64,
    ) -> Result<Self> {
        check_sizes(num_states, num_actions, discount)?;
        if rows.len() != num_actions * num_states {
            return Err(Error::Model(format!(
                "got {} rows, expected {}",
                rows.len(),
                num_actions * num_states
            )));
        }
        let mut row_ptr = Vec::with_capacity(rows.len() + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for mut row in rows {
            row.sort_by_key(|&(y, _)| y);
            let start = cols.len();
            for (y, p) in row {
                if y >= num_states {
                    return Err(Error::Model(format!("next state {y} out of range")));
                }
                if cols.len() > start && cols[cols.len() - 1] == y {
                    *vals.last_mut().unwrap() += p;
                } else {
                    cols.push(y);
                    vals.push(p);
                }
            }
            row_ptr.push(cols.len());
        }
        let mdp = Mdp {
            num_states,
            num_actions,
            discount,
            transitions: Transitions::Sparse { row_ptr, cols, vals },
        };
        mdp.validate()?;
        Ok(mdp)
    }

    fn validate(&self) -> Result<()> {
        for a in 0..self.num_actions {
            for x in 0..self.num_states {
                let mut sum = 0.0;
                for (y, p) in self.row(a, x) {
                    if !(p >= 0.0) || !p.is_finite() {
                        return Err(Error::Model(format!("P({y} | {x}, {a}) = {p} is not a probability")));
                    }
                    sum += p;
                }
                if (sum - 1.0).abs() > ROW_SUM_TOL {
                    return Err(Error::Model(format!("row P(. | {x}, {a}) sums to {sum}")));
                }
            }
        }
        Ok(())
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn discount(&self) -> f64 {
        self.discount
    }

    pub fn is_sparse(&self) -> bool {
        matches!(self.transitions, Transitions::Sparse { .. })
    }

    /// Nonzero entries of `P(. | x, a)`.
    pub fn row(&self, a: usize, x: usize) -> Row<'_> {
        let r = a * self.num_states + x;
        match &self.transitions {
            Transitions::Dense(k) => Row::Dense {
                probs: &k[r * self.num_states..(r + 1) * self.num_states],
                next: 0,
            },
            Transitions::Sparse { row_ptr, cols, vals } => {
                let (lo, hi) = (row_ptr[r], row_ptr[r + 1]);
                Row::Sparse {
                    cols: &cols[lo..hi],
                    vals: &vals[lo..hi],
                    next: 0,
                }
            }
        }
    }

    pub fn transition(&self, a: usize, x: usize, y: usize) -> f64 {
        self.row(a, x).find(|&(z, _)| z == y).map_or(0.0, |(_, p)| p)
    }

    /// `sum_y P(y | x, a) v[y]`.
    pub fn expect(&self, a: usize, x: usize, v: &[f64]) -> f64 {
        let r = a * self.num_states + x;
        match &self.transitions {
            Transitions::Dense(k) => k[r * self.num_states..(r + 1) * self.num_states]
                .iter()
                .zip(v)
                .map(|(p, vy)| p * vy)
                .sum(),
            Transitions::Sparse { row_ptr, cols, vals } => {
                let (lo, hi) = (row_ptr[r], row_ptr[r + 1]);
                cols[lo..hi].iter().zip(&vals[lo..hi]).map(|(&y, p)| p * v[y]).sum()
            }
        }
    }

    /// Feeds the model bytes (sizes, discount, kernel entries) into `sink`, for
    /// content addressing.
    pub fn write_canonical(&self, sink: &mut impl FnMut(&[u8])) {
        sink(&(self.num_states as u64).to_le_bytes());
        sink(&(self.num_actions as u64).to_le_bytes());
        sink(&self.discount.to_le_bytes());
        for a in 0..self.num_actions {
            for x in 0..self.num_states {
                for (y, p) in self.row(a, x) {
                    sink(&(y as u64).to_le_bytes());
                    sink(&p.to_le_bytes());
                }
                sink(&u64::MAX.to_le_bytes());
            }
        }
    }
}

fn check_sizes(num_states: usize, num_actions: usize, discount: f64) -> Result<()> {
    if num_states == 0 || num_actions == 0 {
        return Err(Error::Model("MDP needs at least one state and one action".into()));
    }
    if num_actions > MAX_ACTIONS {
        return Err(Error::Model(format!(
            "{num_actions} actions exceeds the supported maximum of {MAX_ACTIONS}"
        )));
    }
    if !(0.0..1.0).contains(&discount) {
        return Err(Error::Model(format!("discount {discount} not in [0, 1)")));
    }
    Ok(())
}

/// Iterator over `(next_state, probability)` pairs of one kernel row.
pub enum Row<'a> {
    Dense {
        probs: &'a [f64],
        next: usize,
    },
    Sparse {
        cols: &'a [usize],
        vals: &'a [f64],
        next: usize,
    },
}

impl Iterator for Row<'_> {
    type Item = (usize, f64);

    fn next(&mut self) -> Option<(usize, f64)> {
        match self {
            Row::Dense { probs, next } => {
                while *next < probs.len() {
                    let y = *next;
                    *next += 1;
                    if probs[y] != 0.0 {
                        return Some((y, probs[y]));
                    }
                }
                None
            }
            Row::Sparse { cols, vals, next } => {
                let i = *next;
                if i < cols.len() {
                    *next += 1;
                    Some((cols[i], vals[i]))
                } else {
                    None
                }
            }
        }
    }
}

/// Reward `r(x, a)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RewardFunction {
    num_states: usize,
    num_actions: usize,
    values: Vec<f64>,
}

impl RewardFunction {
    pub fn from_state_action(num_states: usize, num_actions: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != num_states * num_actions {
            return Err(Error::Argument(format!(
                "reward has {} entries, expected {}",
                values.len(),
                num_states * num_actions
            )));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::Argument(format!("reward entry {v} is not finite")));
        }
        Ok(RewardFunction {
            num_states,
            num_actions,
            values,
        })
    }

    /// Broadcasts a state reward `r(x)` across actions.
    pub fn from_state(state_values: &[f64], num_actions: usize) -> Result<Self> {
        let values = state_values
            .iter()
            .flat_map(|&v| std::iter::repeat_n(v, num_actions))
            .collect();
        Self::from_state_action(state_values.len(), num_actions, values)
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn get(&self, x: usize, a: usize) -> f64 {
        self.values[x * self.num_actions + a]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Reward reported for state `x` alone: the mean over actions, which is
    /// exact for state rewards.
    pub fn state_value(&self, x: usize) -> f64 {
        let row = &self.values[x * self.num_actions..(x + 1) * self.num_actions];
        row.iter().sum::<f64>() / self.num_actions as f64
    }

    pub fn is_state_only(&self) -> bool {
        self.values
            .chunks(self.num_actions)
            .all(|row| row.iter().all(|&v| v == row[0]))
    }

    /// Fraction of exactly-zero entries.
    pub fn sparsity(&self) -> f64 {
        self.values.iter().filter(|&&v| v == 0.0).count() as f64 / self.values.len() as f64
    }

    pub fn shifted(&self, c: f64) -> Self {
        RewardFunction {
            values: self.values.iter().map(|v| v + c).collect(),
            ..self.clone()
        }
    }

    pub fn write_canonical(&self, sink: &mut impl FnMut(&[u8])) {
        sink(&(self.num_states as u64).to_le_bytes());
        sink(&(self.num_actions as u64).to_le_bytes());
        for v in &self.values {
            sink(&v.to_le_bytes());
        }
    }

    fn check_shape(&self, mdp: &Mdp) -> Result<()> {
        if self.num_states != mdp.num_states || self.num_actions != mdp.num_actions {
            return Err(Error::Argument(format!(
                "reward shape {}x{} does not match MDP {}x{}",
                self.num_states, self.num_actions, mdp.num_states, mdp.num_actions
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct QFunction {
    num_actions: usize,
    q: Vec<f64>,
    /// Sup-norm Bellman optimality residual of `q`.
    pub converged_residual: f64,
}

impl QFunction {
    pub fn get(&self, x: usize, a: usize) -> f64 {
        self.q[x * self.num_actions + a]
    }

    pub fn row(&self, x: usize) -> &[f64] {
        &self.q[x * self.num_actions..(x + 1) * self.num_actions]
    }

    pub fn num_states(&self) -> usize {
        self.q.len() / self.num_actions
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn state_values(&self) -> Vec<f64> {
        self.q.chunks(self.num_actions).map(max_of).collect()
    }
}

/// A stochastic policy `pi(x, a)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Policy {
    num_actions: usize,
    probs: Vec<f64>,
}

impl Policy {
    pub fn new(num_states: usize, num_actions: usize, probs: Vec<f64>) -> Result<Self> {
        if probs.len() != num_states * num_actions {
            return Err(Error::Argument("policy shape mismatch".into()));
        }
        for (x, row) in probs.chunks(num_actions).enumerate() {
            let sum: f64 = row.iter().sum();
            if row.iter().any(|&p| !(p >= 0.0)) || (sum - 1.0).abs() > ROW_SUM_TOL {
                return Err(Error::Argument(format!(
                    "policy row {x} is not a distribution (sum {sum})"
                )));
            }
        }
        Ok(Policy { num_actions, probs })
    }

    /// Uniform over each state's action set; every set must be non-empty.
    pub fn uniform_over(sets: &[ActionSet], num_actions: usize) -> Result<Self> {
        let mut probs = vec![0.0; sets.len() * num_actions];
        for (x, set) in sets.iter().enumerate() {
            if set.is_empty() {
                return Err(Error::Argument(format!("empty action set at state {x}")));
            }
            let w = 1.0 / set.len() as f64;
            for a in set.iter() {
                probs[x * num_actions + a] = w;
            }
        }
        Policy::new(sets.len(), num_actions, probs)
    }

    pub fn deterministic(actions: &[usize], num_actions: usize) -> Result<Self> {
        let sets: Vec<ActionSet> = actions.iter().map(|&a| ActionSet::singleton(a)).collect();
        Self::uniform_over(&sets, num_actions)
    }

    pub fn get(&self, x: usize, a: usize) -> f64 {
        self.probs[x * self.num_actions + a]
    }

    pub fn num_states(&self) -> usize {
        self.probs.len() / self.num_actions
    }
}

fn max_of(row: &[f64]) -> f64 {
    row.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

fn sup_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn stopping_threshold(tol: f64, discount: f64) -> f64 {
    if discount == 0.0 {
        f64::INFINITY
    } else {
        tol * (1.0 - discount) / (2.0 * discount)
    }
}

fn bellman_q(mdp: &Mdp, reward: &RewardFunction, v: &[f64], q: &mut [f64]) {
    let na = mdp.num_actions;
    for x in 0..mdp.num_states {
        for a in 0..na {
            q[x * na + a] = reward.get(x, a) + mdp.discount * mdp.expect(a, x, v);
        }
    }
}

/// Optimal Q-function by value iteration.
///
/// Iteration stops once successive state values differ by at most
/// `tol (1 - discount) / (2 discount)` in sup norm, which bounds the Bellman
/// residual of the returned Q by `tol`.
pub fn solve_q(mdp: &Mdp, reward: &RewardFunction, tol: f64) -> Result<QFunction> {
    if !(tol > 0.0) {
        return Err(Error::Argument(format!("tolerance {tol} must be positive")));
    }
    reward.check_shape(mdp)?;
    let (ns, na) = (mdp.num_states, mdp.num_actions);
    let threshold = stopping_threshold(tol, mdp.discount);
    let mut v = vec![0.0; ns];
    let mut q = vec![0.0; ns * na];
    let mut iterations = 0;
    loop {
        bellman_q(mdp, reward, &v, &mut q);
        let next_v: Vec<f64> = q.chunks(na).map(max_of).collect();
        let delta = sup_diff(&next_v, &v);
        v = next_v;
        iterations += 1;
        if delta <= threshold {
            break;
        }
        if iterations >= MAX_ITERATIONS {
            return Err(Error::Internal(format!(
                "value iteration did not converge in {MAX_ITERATIONS} sweeps"
            )));
        }
    }
    let mut tq = vec![0.0; ns * na];
    bellman_q(mdp, reward, &v, &mut tq);
    let converged_residual = sup_diff(&tq, &q);
    Ok(QFunction {
        num_actions: na,
        q,
        converged_residual,
    })
}

/// Actions within `tie_tol` of the best Q-value at `x`.
pub fn greedy_action_set(q: &QFunction, x: usize, tie_tol: f64) -> ActionSet {
    let row = q.row(x);
    let best = max_of(row);
    row.iter()
        .enumerate()
        .filter(|&(_, &v)| v >= best - tie_tol)
        .map(|(a, _)| a)
        .collect()
}

pub fn greedy_sets(q: &QFunction, tie_tol: f64) -> Vec<ActionSet> {
    (0..q.num_states()).map(|x| greedy_action_set(q, x, tie_tol)).collect()
}

/// State values of `policy` by iterative policy evaluation.
pub fn evaluate_policy(mdp: &Mdp, reward: &RewardFunction, policy: &Policy, tol: f64) -> Result<Vec<f64>> {
    if !(tol > 0.0) {
        return Err(Error::Argument(format!("tolerance {tol} must be positive")));
    }
    reward.check_shape(mdp)?;
    if policy.num_states() != mdp.num_states || policy.num_actions != mdp.num_actions {
        return Err(Error::Argument("policy shape does not match MDP".into()));
    }
    let (ns, na) = (mdp.num_states, mdp.num_actions);
    let threshold = stopping_threshold(tol, mdp.discount);
    let mut v = vec![0.0; ns];
    let mut iterations = 0;
    loop {
        let next_v: Vec<f64> = (0..ns)
            .map(|x| {
                (0..na)
                    .filter(|&a| policy.get(x, a) > 0.0)
                    .map(|a| policy.get(x, a) * (reward.get(x, a) + mdp.discount * mdp.expect(a, x, &v)))
                    .sum()
            })
            .collect();
        let delta = sup_diff(&next_v, &v);
        v = next_v;
        iterations += 1;
        if delta <= threshold {
            return Ok(v);
        }
        if iterations >= MAX_ITERATIONS {
            return Err(Error::Internal(format!(
                "policy evaluation did not converge in {MAX_ITERATIONS} sweeps"
            )));
        }
    }
}

/// Mean over states of `V*(x) - V^policy(x)` under `true_reward`.
pub fn value_loss(mdp: &Mdp, true_reward: &RewardFunction, learned: &Policy) -> Result<f64> {
    ValueLoss::new(mdp, true_reward, DEFAULT_TOL)?.loss(learned)
}

/// Value-loss evaluator that solves for `V*` once.
#[derive(Clone, Debug)]
pub struct ValueLoss<'a> {
    mdp: &'a Mdp,
    reward: &'a RewardFunction,
    tol: f64,
    optimal: Vec<f64>,
}

impl<'a> ValueLoss<'a> {
    pub fn new(mdp: &'a Mdp, reward: &'a RewardFunction, tol: f64) -> Result<Self> {
        let optimal = solve_q(mdp, reward, tol)?.state_values();
        Ok(ValueLoss {
            mdp,
            reward,
            tol,
            optimal,
        })
    }

    pub fn optimal_values(&self) -> &[f64] {
        &self.optimal
    }

    /// Per-state loss `V*(x) - V^policy(x)`.
    pub fn per_state(&self, learned: &Policy) -> Result<Vec<f64>> {
        let v = evaluate_policy(self.mdp, self.reward, learned, self.tol)?;
        Ok(self.optimal.iter().zip(&v).map(|(o, l)| o - l).collect())
    }

    pub fn loss(&self, learned: &Policy) -> Result<f64> {
        let per_state = self.per_state(learned)?;
        Ok(per_state.iter().sum::<f64>() / per_state.len() as f64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single_state(num_actions: usize, discount: f64) -> Mdp {
        Mdp::from_dense(1, num_actions, vec![1.0; num_actions], discount).unwrap()
    }

    /// x0 --a0--> x1, x0 --a1--> x0, x1 absorbing.
    fn chain() -> (Mdp, RewardFunction) {
        let rows = vec![vec![(1, 1.0)], vec![(1, 1.0)], vec![(0, 1.0)], vec![(1, 1.0)]];
        let mdp = Mdp::from_rows(2, 2, rows, 0.9).unwrap();
        let reward = RewardFunction::from_state(&[0.0, 1.0], 2).unwrap();
        (mdp, reward)
    }

    #[test]
    fn geometric_series() {
        let mdp = single_state(1, 0.5);
        let r = RewardFunction::from_state(&[1.0], 1).unwrap();
        let q = solve_q(&mdp, &r, 1e-10).unwrap();
        assert!((q.get(0, 0) - 2.0).abs() < 1e-9);
        assert!(q.converged_residual <= 1e-10);
    }

    #[test]
    fn zero_discount_returns_reward() {
        let kernel = vec![0.5, 0.5, 0.2, 0.8, 1.0, 0.0, 0.0, 1.0];
        let mdp = Mdp::from_dense(2, 2, kernel, 0.0).unwrap();
        let r = RewardFunction::from_state_action(2, 2, vec![0.3, -1.0, 2.0, 0.7]).unwrap();
        let q = solve_q(&mdp, &r, 1e-8).unwrap();
        for x in 0..2 {
            for a in 0..2 {
                assert_eq!(q.get(x, a), r.get(x, a));
            }
        }
        assert_eq!(q.converged_residual, 0.0);
    }

    #[test]
    fn two_state_chain() {
        // V(x1) = 1 / (1 - 0.9) = 10, Q(x0, a0) = 0 + 0.9 * 10 = 9.
        let (mdp, r) = chain();
        let q = solve_q(&mdp, &r, 1e-10).unwrap();
        assert!((q.get(0, 0) - 9.0).abs() < 1e-9);
        assert!((q.get(1, 0) - 10.0).abs() < 1e-9);
        assert!((q.get(1, 1) - 10.0).abs() < 1e-9);
        assert_eq!(greedy_action_set(&q, 0, 1e-6), ActionSet::singleton(0));
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(matches!(Mdp::from_dense(1, 1, vec![0.9], 0.5), Err(Error::Model(_))));
        assert!(matches!(Mdp::from_dense(1, 1, vec![1.0], 1.0), Err(Error::Model(_))));
        let mdp = single_state(1, 0.5);
        let r = RewardFunction::from_state(&[1.0], 1).unwrap();
        assert!(matches!(solve_q(&mdp, &r, 0.0), Err(Error::Argument(_))));
        let wrong = RewardFunction::from_state(&[1.0, 2.0], 1).unwrap();
        assert!(solve_q(&mdp, &wrong, 1e-8).is_err());
    }

    #[test]
    fn greedy_sets_respect_tolerance() {
        let q = QFunction {
            num_actions: 3,
            q: vec![1.0, 1.0, 0.0, 0.0, 0.5, 1.0, 1.0, 1.0 - 1e-12, 0.0],
            converged_residual: 0.0,
        };
        assert_eq!(greedy_action_set(&q, 0, 1e-9), [0, 1].into_iter().collect());
        assert_eq!(greedy_action_set(&q, 1, 1e-9), ActionSet::singleton(2));
        assert_eq!(greedy_action_set(&q, 2, 1e-9), [0, 1].into_iter().collect());
    }

    #[test]
    fn policy_evaluation_examples() {
        let mdp = single_state(2, 0.5);
        let r = RewardFunction::from_state_action(1, 2, vec![0.0, 2.0]).unwrap();
        let uniform = Policy::new(1, 2, vec![0.5, 0.5]).unwrap();
        let v = evaluate_policy(&mdp, &r, &uniform, 1e-10).unwrap();
        assert!((v[0] - 2.0).abs() < 1e-9);

        let (mdp, r) = chain();
        let opt = Policy::deterministic(&[0, 0], 2).unwrap();
        let v = evaluate_policy(&mdp, &r, &opt, 1e-10).unwrap();
        assert!((v[0] - 9.0).abs() < 1e-9);

        let mdp0 = Mdp::from_dense(2, 2, vec![0.5, 0.5, 0.5, 0.5, 1.0, 0.0, 0.0, 1.0], 0.0).unwrap();
        let r0 = RewardFunction::from_state_action(2, 2, vec![1.0, 3.0, -2.0, 0.5]).unwrap();
        let pi = Policy::new(2, 2, vec![0.25, 0.75, 1.0, 0.0]).unwrap();
        let v = evaluate_policy(&mdp0, &r0, &pi, 1e-8).unwrap();
        assert_eq!(v, vec![0.25 + 2.25, -2.0]);
    }

    #[test]
    fn value_loss_examples() {
        let (mdp, r) = chain();
        let q = solve_q(&mdp, &r, DEFAULT_TOL).unwrap();
        let greedy = Policy::uniform_over(&greedy_sets(&q, DEFAULT_TIE_TOL), 2).unwrap();
        assert!(value_loss(&mdp, &r, &greedy).unwrap().abs() <= 2.0 * DEFAULT_TOL);

        // Staying in x0 forever earns nothing: loss 9 at x0 and 0 at x1.
        let stay = Policy::deterministic(&[1, 0], 2).unwrap();
        let vl = ValueLoss::new(&mdp, &r, DEFAULT_TOL).unwrap();
        let per_state = vl.per_state(&stay).unwrap();
        assert!((per_state[0] - 9.0).abs() < 1e-6);
        assert!(per_state[1].abs() < 1e-6);
        assert!((vl.loss(&stay).unwrap() - 4.5).abs() < 1e-6);

        let mdp0 = Mdp::from_dense(2, 2, vec![0.5, 0.5, 0.5, 0.5, 1.0, 0.0, 0.0, 1.0], 0.0).unwrap();
        let r0 = RewardFunction::from_state_action(2, 2, vec![1.0, 3.0, -2.0, 0.5]).unwrap();
        let argmax = Policy::deterministic(&[1, 1], 2).unwrap();
        assert_eq!(value_loss(&mdp0, &r0, &argmax).unwrap(), 0.0);
    }

    #[test]
    fn sparse_storage_is_automatic() {
        let n = 8;
        let mut kernel = vec![0.0; n * n];
        for x in 0..n {
            kernel[x * n + (x + 1) % n] = 1.0;
        }
        let mdp = Mdp::from_dense(n, 1, kernel.clone(), 0.9).unwrap();
        assert!(mdp.is_sparse());
        assert_eq!(mdp.transition(0, 3, 4), 1.0);
        let dense = Mdp::from_dense(2, 1, vec![0.5, 0.5, 0.5, 0.5], 0.9).unwrap();
        assert!(!dense.is_sparse());
    }

    #[test]
    fn action_set_basics() {
        let s: ActionSet = [3, 0, 5].into_iter().collect();
        assert_eq!(s.len(), 3);
        assert_eq!(s.first(), Some(0));
        assert_eq!(s.iter().collect::<Vec<_>>(), vec![0, 3, 5]);
        assert!(s.contains(5) && !s.contains(4));
        assert!(s.intersects(ActionSet::singleton(3)));
        assert!(!s.intersects(ActionSet::singleton(1)));
    }
}
