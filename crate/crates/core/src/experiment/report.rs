//! Metrics and diagnostics computed from trial records.

use serde::Serialize;
use statrs::distribution::{Binomial, DiscreteCDF};

use super::runner::{ObsKind, StepRecord};
use crate::bayes::{map_hypothesis, Posterior};
use crate::hypothesis::HypothesisSpace;
use crate::mdp::ActionSet;
use crate::oracle::ExpertOracle;
use crate::strategy::BoundParams;

/// Significance level for bound violations.
pub const BOUND_ALPHA: f64 = 0.01;

/// Fraction of states where hypothesis `h`'s greedy set meets `optimal`.
pub fn policy_accuracy_of(space: &HypothesisSpace, h: usize, optimal: &[ActionSet]) -> f64 {
    let labels = space.hypothesis(h).labels();
    let hits = labels.iter().zip(optimal).filter(|(a, b)| a.intersects(**b)).count();
    hits as f64 / labels.len() as f64
}

/// Accuracy of the MAP hypothesis against the oracle's optimal sets.
pub fn policy_accuracy(post: &Posterior, space: &HypothesisSpace, oracle: &ExpertOracle) -> f64 {
    policy_accuracy_of(space, map_hypothesis(post), oracle.optimal_sets())
}

/// Mean, standard error and normal 95% interval.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MeanCi {
    pub mean: f64,
    pub stderr: f64,
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
}

impl MeanCi {
    pub fn of(values: impl IntoIterator<Item = f64>) -> Self {
        let v: Vec<f64> = values.into_iter().collect();
        let n = v.len();
        let mean = v.iter().sum::<f64>() / n as f64;
        let stderr = if n > 1 {
            (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0) / n as f64).sqrt()
        } else {
            0.0
        };
        MeanCi {
            mean,
            stderr,
            lo: mean - 1.96 * stderr,
            hi: mean + 1.96 * stderr,
            n,
        }
    }

    pub fn overlaps(&self, other: &MeanCi) -> bool {
        self.lo <= other.hi && other.lo <= self.hi
    }
}

/// Per trial, the first step whose policy accuracy reaches `threshold`, or
/// `num_steps + 1` if it never does. Ordered by trial index.
pub fn queries_to_accuracy(records: &[StepRecord], num_steps: usize, threshold: f64) -> Vec<usize> {
    let trials = records.iter().map(|r| r.trial + 1).max().unwrap_or(0);
    let mut first = vec![num_steps + 1; trials];
    for r in records {
        if r.policy_accuracy >= threshold && r.step < first[r.trial] {
            first[r.trial] = r.step;
        }
    }
    first
}

#[derive(Clone, Debug, Serialize)]
pub struct StepStats {
    pub step: usize,
    pub policy_accuracy: MeanCi,
    pub value_loss: MeanCi,
    pub posterior_mass_true: MeanCi,
    pub map_correct: MeanCi,
}

#[derive(Clone, Debug, Serialize)]
pub struct Summary {
    pub num_trials: usize,
    pub num_steps: usize,
    pub hypothesis_count: usize,
    pub queries_to_90: MeanCi,
    pub steps: Vec<StepStats>,
}

impl Summary {
    pub fn from_records(records: &[StepRecord], num_steps: usize, hypothesis_count: usize) -> Self {
        let mut by_step: Vec<Vec<&StepRecord>> = vec![Vec::new(); num_steps + 1];
        for r in records {
            by_step[r.step].push(r);
        }
        let steps = by_step
            .iter()
            .enumerate()
            .map(|(step, rows)| StepStats {
                step,
                policy_accuracy: MeanCi::of(rows.iter().map(|r| r.policy_accuracy)),
                value_loss: MeanCi::of(rows.iter().map(|r| r.value_loss)),
                posterior_mass_true: MeanCi::of(rows.iter().map(|r| r.posterior_mass_true)),
                map_correct: MeanCi::of(rows.iter().map(|r| f64::from(u8::from(r.map_correct)))),
            })
            .collect();
        let q = queries_to_accuracy(records, num_steps, 0.9);
        Summary {
            num_trials: q.len(),
            num_steps,
            hypothesis_count,
            queries_to_90: MeanCi::of(q.iter().map(|&s| s as f64)),
            steps,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundViolation {
    pub step: usize,
    pub empirical_error: f64,
    pub bound: f64,
    /// `P[Bin(n, bound) >= errors]`.
    pub p_value: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct BoundReport {
    pub vacuous: bool,
    pub steps_checked: usize,
    pub violations: Vec<BoundViolation>,
}

impl BoundReport {
    pub fn passed(&self) -> bool {
        !self.vacuous && self.violations.is_empty()
    }
}

/// Compares the per-step MAP error rate with `min(1, |H| (1 - lambda)^t)`.
/// A step is flagged when the observed error count is implausible at level
/// [`BOUND_ALPHA`] under a binomial with the bound as success probability.
pub fn check_bound(records: &[StepRecord], bound: &BoundParams) -> BoundReport {
    if bound.vacuous {
        return BoundReport {
            vacuous: true,
            steps_checked: 0,
            violations: Vec::new(),
        };
    }
    let num_steps = records.iter().map(|r| r.step).max().unwrap_or(0);
    let mut totals = vec![(0u64, 0u64); num_steps + 1];
    for r in records {
        totals[r.step].0 += 1;
        totals[r.step].1 += u64::from(!r.map_correct);
    }
    let mut violations = Vec::new();
    let mut steps_checked = 0;
    for (t, &(n, errors)) in totals.iter().enumerate() {
        if n == 0 {
            continue;
        }
        steps_checked += 1;
        let b = bound.error_bound(t);
        let p_value = if errors == 0 || b >= 1.0 {
            1.0
        } else if b <= 0.0 {
            0.0
        } else {
            Binomial::new(b, n).expect("valid binomial").sf(errors - 1)
        };
        if p_value < BOUND_ALPHA {
            violations.push(BoundViolation {
                step: t,
                empirical_error: errors as f64 / n as f64,
                bound: b,
                p_value,
            });
        }
    }
    BoundReport {
        vacuous: false,
        steps_checked,
        violations,
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SupermartingaleReport {
    pub pairs: usize,
    pub mean_ratio: f64,
    pub stderr: f64,
    pub passed: bool,
}

/// Pooled mean of `C_{t+1} / C_t` over consecutive steps of each trial where
/// both values are finite and positive.
pub fn supermartingale_report(records: &[StepRecord]) -> SupermartingaleReport {
    let ratios: Vec<f64> = records
        .windows(2)
        .filter(|w| w[0].trial == w[1].trial && w[1].step == w[0].step + 1 && w[1].obs_kind != ObsKind::None)
        .filter(|w| is_usable(w[0].c_t) && is_usable(w[1].c_t))
        .map(|w| (w[1].c_t.ln() - w[0].c_t.ln()).exp())
        .collect();
    ratio_report(&ratios)
}

fn is_usable(c: f64) -> bool {
    c.is_finite() && c > 0.0
}

pub fn ratio_report(ratios: &[f64]) -> SupermartingaleReport {
    let pairs = ratios.len();
    if pairs == 0 {
        return SupermartingaleReport {
            pairs,
            mean_ratio: f64::NAN,
            stderr: f64::NAN,
            passed: false,
        };
    }
    let stats = MeanCi::of(ratios.iter().copied());
    SupermartingaleReport {
        pairs,
        mean_ratio: stats.mean,
        stderr: stats.stderr,
        passed: stats.mean <= 1.0 + 3.0 * stats.stderr,
    }
}
