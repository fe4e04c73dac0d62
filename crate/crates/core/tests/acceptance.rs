//! End-to-end acceptance checks. Each criterion prints one PASS/FAIL line;
//! the process exits non-zero if any criterion fails.

use std::time::{Duration, Instant};

use gbsirl::bayes::{weighted_predictions, NoiseMode, NoiseModel, Observation, Posterior};
use gbsirl::env::{self, driver, puddle, trap};
use gbsirl::experiment::{
    check_bound, queries_to_accuracy, run_experiment, run_trials, supermartingale_report, write_csv, ExperimentConfig,
    Feedback, FeedbackKind, MeanCi, Problem, RunSettings,
};
use gbsirl::hypothesis::{coherence_parameter, is_k_neighborly, neighbor_graph, HypothesisSpace};
use gbsirl::mdp::{solve_q, ActionSet, RewardFunction, DEFAULT_TOL};
use gbsirl::oracle::{ExpertOracle, OracleNoise};
use gbsirl::strategy::{compute_bound, BoundParams, StrategyConfig, StrategyKind};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    passed: bool,
    detail: String,
}

type Criterion = (&'static str, &'static str, fn() -> Outcome);

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

fn main() {
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let criteria: [Criterion; 10] = [
        ("C1", "posterior matches brute-force Bayes", c1_posterior_oracle),
        ("C2", "consistency on random-10x5", c2_consistency),
        ("C3", "empirical error under the convergence bound", c3_rate_bound),
        ("C4", "query budget arithmetic", c4_sample_complexity),
        ("C5", "incorrect-mass odds are a supermartingale", c5_supermartingale),
        ("C6", "coherence dichotomy", c6_dichotomy),
        ("C7", "active beats random on random-50x5", c7_active_vs_random),
        ("C8", "shaped beats sparse under reward feedback", c8_shaped_vs_sparse),
        ("C9", "domain fidelity", c9_domains),
        ("C10", "byte-identical CSV output", c10_determinism),
    ];
    let mut failures = 0;
    for (id, name, check) in criteria {
        if !filter.is_empty() && !filter.iter().any(|f| f == id) {
            continue;
        }
        let start = Instant::now();
        let result = std::panic::catch_unwind(check).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            outcome(false, format!("panicked: {msg}"))
        });
        let verdict = if result.passed { "PASS" } else { "FAIL" };
        println!(
            "[{verdict}] {id} {name}: {} ({:.1}s)",
            result.detail,
            start.elapsed().as_secs_f64()
        );
        failures += usize::from(!result.passed);
    }
    if failures > 0 {
        println!("{failures} acceptance criteria failed");
        std::process::exit(1);
    }
}

fn linear_posterior(prior: &[f64], space: &HypothesisSpace, history: &[Observation], noise: &NoiseModel) -> Vec<f64> {
    let mut p: Vec<f64> = prior.to_vec();
    for obs in history {
        for (h, ph) in p.iter_mut().enumerate() {
            *ph *= match *obs {
                Observation::Action { state, action } => {
                    if space.hypothesis(h).greedy_set(state).contains(action) {
                        noise.gamma_hat()[state]
                    } else {
                        noise.beta_hat()[state]
                    }
                }
                Observation::Reward { state, value } => {
                    let d = value - space.rewards()[h].state_value(state);
                    (-d * d / noise.sigma_hat()).exp()
                }
            };
        }
    }
    let z: f64 = p.iter().sum();
    p.iter().map(|v| v / z).collect()
}

fn random_labels<R: Rng>(rng: &mut R, ns: usize, na: usize) -> Vec<ActionSet> {
    (0..ns)
        .map(|_| {
            let mut s = ActionSet::singleton(rng.random_range(0..na));
            if rng.random_bool(0.2) {
                s.insert(rng.random_range(0..na));
            }
            s
        })
        .collect()
}

fn c1_posterior_oracle() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let ns = rng.random_range(1..=20);
        let na = rng.random_range(2..=5);
        let k = rng.random_range(1..=50);
        let labels: Vec<Vec<ActionSet>> = (0..k).map(|_| random_labels(&mut rng, ns, na)).collect();
        let weights: Vec<f64> = (0..k).map(|_| rng.random_range(0.1..1.0)).collect();
        let space = HypothesisSpace::from_labels(ns, na, labels, &weights).unwrap();
        let rewards = (0..space.len())
            .map(|_| {
                let v: Vec<f64> = (0..ns).map(|_| rng.random_range(-1.0..1.0)).collect();
                RewardFunction::from_state(&v, na).unwrap()
            })
            .collect();
        let space = space.with_rewards(rewards).unwrap();
        let beta = rng.random_range(0.01..1.0 / na as f64);
        let noise = if rng.random_bool(0.5) {
            NoiseModel::per_action(ns, na, beta, rng.random_range(0.5..2.0)).unwrap()
        } else {
            NoiseModel::aggregated(ns, na, beta, rng.random_range(0.5..2.0)).unwrap()
        };
        let steps = rng.random_range(0..=20);
        let history: Vec<Observation> = (0..steps)
            .map(|_| {
                let state = rng.random_range(0..ns);
                if rng.random_bool(0.5) {
                    Observation::Action {
                        state,
                        action: rng.random_range(0..na),
                    }
                } else {
                    Observation::Reward {
                        state,
                        value: rng.random_range(-1.0..1.0),
                    }
                }
            })
            .collect();
        let mut post = Posterior::for_space(&space);
        for &obs in &history {
            post.apply(&space, obs, &noise).unwrap();
        }
        let direct = linear_posterior(space.prior(), &space, &history, &noise);
        for (a, b) in post.probs().iter().zip(&direct) {
            worst = worst.max((a - b).abs());
        }
    }
    let elapsed = start.elapsed();
    outcome(
        worst <= 1e-10 && elapsed < Duration::from_secs(10),
        format!("max abs deviation {worst:.2e} over 100 instances"),
    )
}

fn c2_consistency() -> Outcome {
    let start = Instant::now();
    let config = ExperimentConfig {
        domain: "random-10x5".into(),
        pool_size: 50,
        strategy: StrategyKind::GbsV2,
        noise_mode: NoiseMode::Aggregated,
        beta_star: 0.1,
        beta_hat: 0.15,
        num_trials: 200,
        num_steps: 100,
        master_seed: 2,
        ..Default::default()
    };
    let result = run_experiment(&config).unwrap();
    let last = &result.summary.steps[100];
    let rate = last.map_correct.mean;
    outcome(
        rate >= 0.95 && start.elapsed() < Duration::from_secs(120),
        format!(
            "MAP-correct rate at step 100 = {rate:.3} (|H| = {})",
            result.summary.hypothesis_count
        ),
    )
}

/// Threshold classifiers on a line of `n` cells, without the two constant
/// labelings: `h_k(x) = 1` iff `x >= k`, for `k = 1..n-1`.
fn threshold_space(n: usize) -> HypothesisSpace {
    let labels: Vec<Vec<ActionSet>> = (1..n)
        .map(|k| (0..n).map(|x| ActionSet::singleton(usize::from(x >= k))).collect())
        .collect();
    HypothesisSpace::from_labels(n, 2, labels, &vec![1.0; n - 1]).unwrap()
}

/// A random space whose cells form a chain, each differing from the previous
/// one under exactly one hypothesis. Returns `None` if the draw degenerates.
fn chain_space<R: Rng>(rng: &mut R, cells: usize, hyps: usize, na: usize) -> Option<HypothesisSpace> {
    let mut columns: Vec<Vec<usize>> = vec![(0..hyps).map(|_| rng.random_range(0..na)).collect()];
    while columns.len() < cells {
        let mut next = columns.last().unwrap().clone();
        let h = rng.random_range(0..hyps);
        next[h] = (next[h] + rng.random_range(1..na)) % na;
        if !columns.contains(&next) {
            columns.push(next);
        } else if rng.random_bool(0.05) {
            return None;
        }
    }
    let labels: Vec<Vec<ActionSet>> = (0..hyps)
        .map(|h| columns.iter().map(|c| ActionSet::singleton(c[h])).collect())
        .collect();
    let space = HypothesisSpace::from_labels(cells, na, labels, &vec![1.0; hyps]).ok()?;
    (space.len() == hyps && space.num_cells() == cells).then_some(space)
}

fn c3_rate_bound() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let mut instances = vec![(String::from("threshold-12"), threshold_space(12))];
    while instances.len() < 4 {
        let hyps = rng.random_range(6..=20);
        // Only instances meeting the theorem's hypotheses are admissible.
        if let Some(s) = chain_space(&mut rng, 10, hyps, 2) {
            if coherence_parameter(&s).unwrap() < 1.0 - 1e-9 {
                instances.push((format!("chain-{}", instances.len()), s));
            }
        }
    }
    let mut details = Vec::new();
    let mut all_ok = true;
    for (name, space) in instances {
        let neighborly = is_k_neighborly(&neighbor_graph(&space, 1));
        let c_star = coherence_parameter(&space).unwrap();
        let true_index = space.len() / 2;
        let problem = Problem::from_space(space, true_index);
        let ns = problem.space.num_states();
        let oracle = ExpertOracle::from_optimal_sets(
            2,
            problem.optimal_sets.clone(),
            None,
            OracleNoise::WrongAction(0.1),
            0.0,
            0,
        )
        .unwrap();
        let noise = NoiseModel::per_action(ns, 2, 0.2, 1.0).unwrap();
        let bound = compute_bound(&problem.space, &noise, &oracle, 0.05).unwrap();
        let settings = RunSettings {
            strategy: StrategyConfig::new(StrategyKind::GbsV1, 0),
            feedback: Feedback::Action,
            num_trials: 1000,
            num_steps: 80,
            oracle_noise: OracleNoise::WrongAction(0.1),
            sigma: 0.0,
            noise,
            master_seed: 3,
            record_timing: false,
            workers: None,
        };
        let records = run_trials(&problem, &settings).unwrap();
        let report = check_bound(&records, &bound);
        let ok = neighborly && c_star < 1.0 && report.passed();
        all_ok &= ok;
        details.push(format!(
            "{name}: |H|={} c*={c_star:.3} lambda={:.4} violations={}",
            problem.space.len(),
            bound.lambda,
            report.violations.len()
        ));
    }
    outcome(all_ok && start.elapsed() < Duration::from_secs(300), details.join("; "))
}

fn c4_sample_complexity() -> Outcome {
    // (epsilon, c*, |H|, delta, expected t_min), hand-evaluated.
    let fixtures = [
        (0.5, 0.0, 500, 0.05, 74),
        (0.8, 0.2, 100, 0.01, 47),
        (0.3, 0.6, 50, 0.1, 104),
        (1.0, -1.0, 2, 0.5, 6),
    ];
    let mut ok = true;
    for (eps, c, h, d, want) in fixtures {
        let b = BoundParams::from_parts(eps, c, h, d).unwrap();
        ok &= b.t_min == Some(want);
    }
    // End to end: noiseless oracle, beta_hat = 0.1 aggregated, threshold line
    // with 10 cells (|H| = 9, c* = -1): epsilon = 8/9, lambda = 2/9,
    // t_min = ceil(4.5 ln 180) = 24.
    let space = threshold_space(10);
    let optimal = space.hypothesis(4).labels().to_vec();
    let oracle = ExpertOracle::from_optimal_sets(2, optimal, None, OracleNoise::WrongAction(0.0), 0.0, 0).unwrap();
    let noise = NoiseModel::aggregated(10, 2, 0.1, 1.0).unwrap();
    let b = compute_bound(&space, &noise, &oracle, 0.05).unwrap();
    ok &= (b.c_star + 1.0).abs() < 1e-9 && (b.lambda - 2.0 / 9.0).abs() < 1e-12 && b.t_min == Some(24);
    outcome(ok, format!("{} fixtures plus one end-to-end bound", fixtures.len()))
}

fn c5_supermartingale() -> Outcome {
    let config = ExperimentConfig {
        domain: "random-10x5".into(),
        pool_size: 100,
        strategy: StrategyKind::GbsV2,
        noise_mode: NoiseMode::Aggregated,
        beta_star: 0.1,
        beta_hat: 0.15,
        num_trials: 200,
        num_steps: 20,
        master_seed: 5,
        ..Default::default()
    };
    let result = run_experiment(&config).unwrap();
    let report = supermartingale_report(&result.records);
    outcome(
        report.passed && report.pairs >= 2000,
        format!(
            "mean ratio {:.4} +- {:.4} over {} transitions",
            report.mean_ratio, report.stderr, report.pairs
        ),
    )
}

fn random_posterior<R: Rng>(rng: &mut R, n: usize) -> Posterior {
    let sharpness = [1.0, 3.0, 10.0][rng.random_range(0..3)];
    let w: Vec<f64> = (0..n)
        .map(|_| {
            let e: f64 = -rng.random::<f64>().max(1e-300).ln();
            e.powf(sharpness)
        })
        .collect();
    Posterior::from_prior(&w).unwrap()
}

fn c6_dichotomy() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(606);
    let mut spaces = Vec::new();
    while spaces.len() < 20 {
        let na = rng.random_range(2..=4);
        let cells = rng.random_range(3..=15);
        let hyps = rng.random_range(2..=30);
        if let Some(s) = chain_space(&mut rng, cells, hyps, na) {
            if is_k_neighborly(&neighbor_graph(&s, 1)) {
                spaces.push(s);
            }
        }
    }
    let mut counterexamples = 0;
    let mut low_cell = 0;
    for space in &spaces {
        let c_star = coherence_parameter(space).unwrap();
        let graph = neighbor_graph(space, 1);
        for _ in 0..500 {
            let post = random_posterior(&mut rng, space.len());
            let preds = weighted_predictions(&post, space);
            if preds.iter().any(|p| p.w <= c_star + 1e-9) {
                low_cell += 1;
                continue;
            }
            let pair = graph
                .edges()
                .iter()
                .any(|&(i, j)| preds[i].w > c_star && preds[j].w > c_star && preds[i].action != preds[j].action);
            if !pair {
                counterexamples += 1;
            }
        }
    }
    outcome(
        counterexamples == 0,
        format!("{counterexamples} counterexamples in 10000 posteriors ({low_cell} resolved by a low cell)"),
    )
}

fn queries_ci(config: &ExperimentConfig) -> MeanCi {
    let result = run_experiment(config).unwrap();
    let q = queries_to_accuracy(&result.records, config.num_steps, 0.9);
    MeanCi::of(q.iter().map(|&s| s as f64))
}

fn c7_active_vs_random() -> Outcome {
    // 200 trials spread over 10 independently generated MDPs, 20 each, since
    // the truth is fixed within one domain.
    let start = Instant::now();
    let pooled = |strategy: StrategyKind| {
        let q: Vec<f64> = (0..10)
            .flat_map(|domain_seed| {
                let config = ExperimentConfig {
                    domain: "random-50x5".into(),
                    domain_seed,
                    strategy,
                    pool_size: 500,
                    num_trials: 20,
                    num_steps: 100,
                    master_seed: 7 + 1000 * domain_seed,
                    ..Default::default()
                };
                let result = run_experiment(&config).unwrap();
                queries_to_accuracy(&result.records, config.num_steps, 0.9)
            })
            .map(|s| s as f64)
            .collect();
        MeanCi::of(q)
    };
    let gbs = pooled(StrategyKind::GbsV2);
    let random = pooled(StrategyKind::Random);
    outcome(
        gbs.mean < random.mean && !gbs.overlaps(&random) && gbs.n == 200 && start.elapsed() < Duration::from_secs(600),
        format!(
            "queries to 90% accuracy: gbs-v2 {:.2} [{:.2}, {:.2}], random {:.2} [{:.2}, {:.2}]",
            gbs.mean, gbs.lo, gbs.hi, random.mean, random.lo, random.hi
        ),
    )
}

fn c8_shaped_vs_sparse() -> Outcome {
    let base = ExperimentConfig {
        strategy: StrategyKind::GbsV2,
        feedback: FeedbackKind::Reward,
        pool_size: 500,
        num_trials: 200,
        num_steps: 100,
        sigma: 0.0,
        sigma_hat: 0.1,
        master_seed: 8,
        ..Default::default()
    };
    let sparse = queries_ci(&ExperimentConfig {
        domain: "grid19x10-sparse".into(),
        ..base.clone()
    });
    let shaped = queries_ci(&ExperimentConfig {
        domain: "grid19x10-shaped".into(),
        ..base
    });
    outcome(
        shaped.mean < sparse.mean && !shaped.overlaps(&sparse),
        format!(
            "queries to 90% accuracy: shaped {:.2} [{:.2}, {:.2}], sparse {:.2} [{:.2}, {:.2}]",
            shaped.mean, shaped.lo, shaped.hi, sparse.mean, sparse.lo, sparse.hi
        ),
    )
}

fn c9_domains() -> Outcome {
    let mut failures: Vec<String> = Vec::new();
    let mut check = |ok: bool, what: &str| {
        if !ok {
            failures.push(what.to_string());
        }
    };

    let p = env::puddle_world().unwrap();
    check(p.mdp.num_states() == 400 && p.mdp.num_actions() == 4, "puddle size");
    check(p.true_reward.get(puddle::goal(), 0) == 1.0, "puddle goal reward");
    let s = puddle::state(7, 3);
    let expected = [(6, 0.06), (7, 0.24), (8, 0.4), (9, 0.24), (10, 0.06)];
    check(
        expected
            .iter()
            .all(|&(x, q)| (p.mdp.transition(3, s, puddle::state(x, 3)) - q).abs() < 1e-12),
        "puddle five-point step",
    );
    check(p.mdp.discount() == 0.95, "puddle discount");

    let t = env::trap_world().unwrap();
    check(t.mdp.num_states() == 900 && t.mdp.num_actions() == 4, "trap size");
    let goal_count = (0..900).filter(|&x| t.true_reward.get(x, 0) != 0.0).count();
    check(goal_count == 1 && t.true_reward.get(899, 0) == 1.0, "trap reward");
    check(
        (0..4).all(|a| (0..900).all(|x| t.mdp.row(a, x).count() == 1)),
        "trap transitions deterministic",
    );
    let layout = trap::default_layout();
    check(
        (0..900).all(|x| reaches_goal(&layout, x)),
        "trap goal reachable from every state",
    );
    let q = solve_q(&t.mdp, &t.true_reward, DEFAULT_TOL).unwrap();
    check(greedy_reaches_goal(&layout, &q), "trap greedy policy reaches goal");

    let d = env::driver_world().unwrap();
    check(d.mdp.num_states() == 16875 && d.mdp.num_actions() == 5, "driver size");
    let crash = driver::DriverState {
        agent_lane: 1,
        cars: [
            driver::Car { lane: 1, row: 0 },
            driver::Car { lane: 2, row: 2 },
            driver::Car { lane: 3, row: 4 },
        ],
    };
    check(d.true_reward.get(crash.index(), 1) == -10.0, "driver crash reward");
    let calm = driver::DriverState {
        agent_lane: 2,
        cars: [
            driver::Car { lane: 1, row: 0 },
            driver::Car { lane: 3, row: 2 },
            driver::Car { lane: 1, row: 4 },
        ],
    };
    check(d.true_reward.get(calm.index(), 2) == 0.0, "driver calm reward");
    let solve_start = Instant::now();
    let dq = solve_q(&d.mdp, &d.true_reward, DEFAULT_TOL).unwrap();
    let solve_time = solve_start.elapsed();
    check(solve_time < Duration::from_secs(60), "driver solve time");
    check(dq.converged_residual.is_finite(), "driver solve converged");

    outcome(
        failures.is_empty(),
        if failures.is_empty() {
            format!("all spot checks hold; driver solve {:.2}s", solve_time.as_secs_f64())
        } else {
            format!("failed: {}", failures.join(", "))
        },
    )
}

fn reaches_goal(layout: &trap::TrapLayout, start: usize) -> bool {
    let mut seen = vec![false; layout.num_states()];
    let mut stack = vec![start];
    while let Some(s) = stack.pop() {
        if layout.cell(s) == trap::Cell::Goal {
            return true;
        }
        if std::mem::replace(&mut seen[s], true) {
            continue;
        }
        stack.extend((0..4).map(|a| layout.next_state(s, a)));
    }
    false
}

fn greedy_reaches_goal(layout: &trap::TrapLayout, q: &gbsirl::mdp::QFunction) -> bool {
    (0..layout.num_states()).all(|start| {
        let mut s = start;
        for _ in 0..layout.num_states() {
            if layout.cell(s) == trap::Cell::Goal {
                return true;
            }
            let row = q.row(s);
            let a = (0..4).fold(0, |b, a| if row[a] > row[b] { a } else { b });
            s = layout.next_state(s, a);
        }
        false
    })
}

fn c10_determinism() -> Outcome {
    let config = ExperimentConfig {
        domain: "random-10x5".into(),
        pool_size: 60,
        strategy: StrategyKind::GbsV1,
        feedback: FeedbackKind::Mixed,
        action_fraction: 0.5,
        sigma: 0.2,
        sigma_hat: 0.3,
        beta_hat: 0.15,
        num_trials: 30,
        num_steps: 40,
        master_seed: 10,
        ..Default::default()
    };
    let render = || {
        let mut out = Vec::new();
        write_csv(&run_experiment(&config).unwrap().records, &mut out).unwrap();
        out
    };
    let (a, b) = (render(), render());
    outcome(
        a == b && !a.is_empty(),
        format!("two runs produced {} identical bytes", a.len()),
    )
}
