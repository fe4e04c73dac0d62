//! Monte-Carlo trial loop.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::config::{ExperimentConfig, Feedback};
use super::report::{policy_accuracy_of, Summary};
use crate::bayes::{incorrect_mass_ratio, map_hypothesis, NoiseModel, Posterior};
use crate::cache::{build_space_cached, cache_dir_from_env};
use crate::env::{self, DomainSpec};
use crate::error::{Error, Result};
use crate::hypothesis::{neighbor_graph, sparsity_weights, HypothesisSpace, NeighborGraph};
use crate::mdp::{ActionSet, Mdp, Policy, RewardFunction, ValueLoss, DEFAULT_TOL};
use crate::oracle::{ExpertOracle, OracleNoise};
use crate::strategy::{
    select_query_iqbc, select_query_random, select_query_v1, select_query_v2, select_query_v3, select_reward_query_at,
    QueryDecision, StrategyConfig, StrategyKind,
};

/// Environment variable bounding the number of worker threads.
pub const WORKERS_ENV: &str = "GBSIRL_WORKERS";

/// Stream used to shuffle the reward pool, apart from trial streams.
const POOL_SHUFFLE_STREAM: u64 = 2;

pub const CSV_HEADER: &str =
    "trial,step,queried_cell,obs_kind,obs_value,policy_accuracy,value_loss,posterior_mass_true,c_t_ratio,map_correct,wall_clock_ns";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ObsKind {
    /// The prior row before any query.
    None,
    Action,
    Reward,
    /// Version 3 declared convergence; no query was issued.
    Stop,
}

impl ObsKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ObsKind::None => "none",
            ObsKind::Action => "action",
            ObsKind::Reward => "reward",
            ObsKind::Stop => "stop",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepRecord {
    pub trial: usize,
    pub step: usize,
    pub queried_cell: Option<usize>,
    pub obs_kind: ObsKind,
    pub obs_value: Option<f64>,
    pub policy_accuracy: f64,
    pub value_loss: f64,
    pub posterior_mass_true: f64,
    /// `C_t = (1 - p(h*)) / p(h*)`.
    pub c_t: f64,
    pub map_correct: bool,
    pub wall_clock_ns: u64,
}

/// A hypothesis space together with the ground truth the oracle answers from.
#[derive(Clone, Debug)]
pub struct Problem {
    pub space: HypothesisSpace,
    pub true_index: usize,
    pub optimal_sets: Vec<ActionSet>,
    pub true_reward: Option<RewardFunction>,
    /// Needed for value loss; without it the loss is recorded as NaN.
    pub mdp: Option<Mdp>,
}

impl Problem {
    /// A label-only problem whose truth is hypothesis `true_index`.
    pub fn from_space(space: HypothesisSpace, true_index: usize) -> Self {
        let optimal_sets = space.hypothesis(true_index).labels().to_vec();
        let true_reward = space.rewards().get(true_index).cloned();
        Problem {
            space,
            true_index,
            optimal_sets,
            true_reward,
            mdp: None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct RunSettings {
    pub strategy: StrategyConfig,
    pub feedback: Feedback,
    pub num_trials: usize,
    pub num_steps: usize,
    pub oracle_noise: OracleNoise,
    pub sigma: f64,
    pub noise: NoiseModel,
    pub master_seed: u64,
    pub record_timing: bool,
    pub workers: Option<usize>,
}

/// Reads the worker count from the environment.
pub fn workers_from_env() -> Option<usize> {
    std::env::var(WORKERS_ENV).ok()?.parse().ok().filter(|&n| n > 0)
}

/// The domain and its shuffled reward pool for a config, with the position
/// the true reward landed at.
pub fn build_pool(config: &ExperimentConfig) -> Result<(DomainSpec, Vec<RewardFunction>, usize)> {
    let domain = env::domain(&config.domain, config.domain_seed)?;
    let pool = domain.reward_pool(config.pool_size, config.pool_seed)?;
    // Shuffle so the true reward does not sit at index 0, where it would win
    // every MAP tie.
    let mut order: Vec<usize> = (0..pool.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(config.pool_seed);
    rng.set_stream(POOL_SHUFFLE_STREAM);
    order.shuffle(&mut rng);
    let true_position = order.iter().position(|&k| k == 0).expect("pool is non-empty");
    let pool = order.iter().map(|&k| pool[k].clone()).collect();
    Ok((domain, pool, true_position))
}

/// Builds the problem for a config: domain, shuffled reward pool, space.
pub fn prepare_problem(config: &ExperimentConfig) -> Result<(DomainSpec, Problem)> {
    let (domain, pool, true_position) = build_pool(config)?;
    let weights = sparsity_weights(&pool);
    let space = build_space_cached(
        &domain.mdp,
        &pool,
        &weights,
        config.tie_tol,
        cache_dir_from_env().as_deref(),
    )?;
    let true_index = space
        .hypothesis_of_reward(true_position)
        .ok_or_else(|| Error::Internal("true reward missing from space".into()))?;
    let mut problem = Problem::from_space(space, true_index);
    problem.true_reward = Some(domain.true_reward.clone());
    problem.mdp = Some(domain.mdp.clone());
    Ok((domain, problem))
}

pub fn settings_from_config(config: &ExperimentConfig, problem: &Problem) -> Result<RunSettings> {
    let (ns, na) = (problem.space.num_states(), problem.space.num_actions());
    Ok(RunSettings {
        strategy: config.strategy_config(),
        feedback: config.feedback(),
        num_trials: config.num_trials,
        num_steps: config.num_steps,
        oracle_noise: config.oracle_noise(na)?,
        sigma: config.sigma,
        noise: config.noise_model(ns, na)?,
        master_seed: config.master_seed,
        record_timing: config.record_timing,
        workers: workers_from_env(),
    })
}

pub struct ExperimentResult {
    pub records: Vec<StepRecord>,
    pub summary: Summary,
}

pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentResult> {
    config.validate()?;
    let (_, problem) = prepare_problem(config)?;
    let settings = settings_from_config(config, &problem)?;
    let records = run_trials(&problem, &settings)?;
    let summary = Summary::from_records(&records, config.num_steps, problem.space.len());
    Ok(ExperimentResult { records, summary })
}

/// Runs every trial and returns rows ordered by `(trial, step)`.
pub fn run_trials(problem: &Problem, settings: &RunSettings) -> Result<Vec<StepRecord>> {
    settings.strategy.validate()?;
    if settings.strategy.kind == StrategyKind::Emg {
        return Err(Error::NotImplemented("expected myopic gain query selection"));
    }
    let needs_rewards = settings.feedback != Feedback::Action;
    if needs_rewards && (!problem.space.has_rewards() || problem.true_reward.is_none()) {
        return Err(Error::Argument("reward feedback needs reward functions".into()));
    }
    let shared = Shared::new(problem, settings)?;
    let run = || -> Result<Vec<Vec<StepRecord>>> {
        (0..settings.num_trials)
            .into_par_iter()
            .map(|trial| run_trial(&shared, trial))
            .collect()
    };
    let per_trial = match settings.workers {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Internal(e.to_string()))?
            .install(run)?,
        None => run()?,
    };
    Ok(per_trial.into_iter().flatten().collect())
}

struct Shared<'a> {
    problem: &'a Problem,
    settings: &'a RunSettings,
    graph: Option<NeighborGraph>,
    cell_states: Vec<Vec<usize>>,
    value_loss: Option<ValueLoss<'a>>,
    // Value loss by MAP index, shared across trials.
    loss_cache: Mutex<HashMap<usize, f64>>,
}

impl<'a> Shared<'a> {
    fn new(problem: &'a Problem, settings: &'a RunSettings) -> Result<Self> {
        let space = &problem.space;
        let graph = (settings.strategy.kind == StrategyKind::GbsV1).then(|| neighbor_graph(space, 1));
        let mut cell_states = vec![Vec::new(); space.num_cells()];
        for (x, &c) in space.partition().cell_of_state().iter().enumerate() {
            cell_states[c].push(x);
        }
        let value_loss = match (&problem.mdp, &problem.true_reward) {
            (Some(mdp), Some(r)) => Some(ValueLoss::new(mdp, r, DEFAULT_TOL)?),
            _ => None,
        };
        Ok(Shared {
            problem,
            settings,
            graph,
            cell_states,
            value_loss,
            loss_cache: Mutex::new(HashMap::new()),
        })
    }
}

enum Query {
    Action(usize),
    Reward(usize),
    Stop,
}

fn run_trial(shared: &Shared<'_>, trial: usize) -> Result<Vec<StepRecord>> {
    let (problem, settings) = (shared.problem, shared.settings);
    let space = &problem.space;
    let seed = settings.master_seed.wrapping_add(trial as u64);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut oracle = ExpertOracle::from_optimal_sets(
        space.num_actions(),
        problem.optimal_sets.clone(),
        problem.true_reward.clone(),
        settings.oracle_noise.clone(),
        settings.sigma,
        seed,
    )?;
    let mut post = Posterior::for_space(space);
    let mut rows = Vec::with_capacity(settings.num_steps + 1);

    let mut record = |post: &Posterior, step, cell, kind, value, elapsed: u64| -> Result<()> {
        let map = map_hypothesis(post);
        let value_loss = match &shared.value_loss {
            Some(vl) => {
                let cached = shared
                    .loss_cache
                    .lock()
                    .expect("loss cache poisoned")
                    .get(&map)
                    .copied();
                match cached {
                    Some(l) => l,
                    None => {
                        let policy = Policy::uniform_over(space.hypothesis(map).labels(), space.num_actions())?;
                        let l = vl.loss(&policy)?;
                        shared.loss_cache.lock().expect("loss cache poisoned").insert(map, l);
                        l
                    }
                }
            }
            None => f64::NAN,
        };
        rows.push(StepRecord {
            trial,
            step,
            queried_cell: cell,
            obs_kind: kind,
            obs_value: value,
            policy_accuracy: policy_accuracy_of(space, map, &problem.optimal_sets),
            value_loss,
            posterior_mass_true: post.prob(problem.true_index),
            c_t: incorrect_mass_ratio(post, problem.true_index),
            map_correct: map == problem.true_index,
            wall_clock_ns: if settings.record_timing { elapsed } else { 0 },
        });
        Ok(())
    };

    record(&post, 0, None, ObsKind::None, None, 0)?;
    for t in 0..settings.num_steps {
        let start = Instant::now();
        let query = choose_query(shared, &post, t, &mut rng)?;
        let (cell, kind, value) = match query {
            Query::Stop => (None, ObsKind::Stop, None),
            Query::Action(x) => {
                let a = oracle.sample_action(x);
                post.update_action(space, x, a, &settings.noise)?;
                (Some(space.partition().cell(x)), ObsKind::Action, Some(a as f64))
            }
            Query::Reward(x) => {
                let u = oracle.sample_reward(x)?;
                post.update_reward(space, x, u, &settings.noise)?;
                (Some(space.partition().cell(x)), ObsKind::Reward, Some(u))
            }
        };
        let elapsed = start.elapsed().as_nanos() as u64;
        record(&post, t + 1, cell, kind, value, elapsed)?;
    }
    Ok(rows)
}

fn choose_query<R: Rng>(shared: &Shared<'_>, post: &Posterior, t: usize, rng: &mut R) -> Result<Query> {
    let space = &shared.problem.space;
    let strategy = &shared.settings.strategy;
    let cell = match strategy.kind {
        StrategyKind::GbsV1 => select_query_v1(post, space, shared.graph.as_ref().expect("graph built"), rng),
        StrategyKind::GbsV2 => select_query_v2(post, space),
        StrategyKind::GbsV3 => match select_query_v3(post, space, strategy.c_hat.expect("validated")) {
            QueryDecision::Query(i) => i,
            QueryDecision::Stop(_) => return Ok(Query::Stop),
        },
        StrategyKind::Random => select_query_random(space, rng),
        StrategyKind::Iqbc => select_query_iqbc(post, space, strategy.iqbc_weighted),
        StrategyKind::Emg => return Err(Error::NotImplemented("expected myopic gain query selection")),
    };
    let states = &shared.cell_states[cell];
    let x = states[rng.random_range(0..states.len())];
    if shared.settings.feedback.is_action_step(t) {
        return Ok(Query::Action(x));
    }
    if strategy.kind == StrategyKind::Random {
        return Ok(Query::Reward(rng.random_range(0..space.num_states())));
    }
    Ok(Query::Reward(select_reward_query_at(post, space, x)?))
}

fn fmt_f64(out: &mut String, v: f64) {
    if v.is_nan() {
        out.push_str("nan");
    } else if v.is_infinite() {
        out.push_str(if v > 0.0 { "inf" } else { "-inf" });
    } else {
        let _ = write!(out, "{v}");
    }
}

pub fn write_csv(records: &[StepRecord], mut w: impl std::io::Write) -> Result<()> {
    let mut buf = String::with_capacity(128 * (records.len() + 1));
    buf.push_str(CSV_HEADER);
    buf.push('\n');
    for r in records {
        let _ = write!(buf, "{},{},", r.trial, r.step);
        if let Some(c) = r.queried_cell {
            let _ = write!(buf, "{c}");
        }
        let _ = write!(buf, ",{},", r.obs_kind.as_str());
        match (r.obs_kind, r.obs_value) {
            (ObsKind::Action, Some(v)) => {
                let _ = write!(buf, "{}", v as usize);
            }
            (_, Some(v)) => fmt_f64(&mut buf, v),
            _ => {}
        }
        for v in [r.policy_accuracy, r.value_loss, r.posterior_mass_true, r.c_t] {
            buf.push(',');
            fmt_f64(&mut buf, v);
        }
        let _ = writeln!(buf, ",{},{}", u8::from(r.map_correct), r.wall_clock_ns);
    }
    w.write_all(buf.as_bytes())?;
    Ok(())
}

/// Path of the summary written next to a CSV.
/// `<csv>.summary.json`, next to the CSV.
pub fn summary_path(csv: &Path) -> PathBuf {
    let mut name = csv.as_os_str().to_owned();
    name.push(".summary.json");
    PathBuf::from(name)
}

/// Writes the CSV and its summary JSON.
pub fn write_outputs(result: &ExperimentResult, csv_path: &Path) -> Result<()> {
    if let Some(dir) = csv_path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    let mut file = std::io::BufWriter::new(std::fs::File::create(csv_path)?);
    write_csv(&result.records, &mut file)?;
    file.flush()?;
    std::fs::write(summary_path(csv_path), serde_json::to_string_pretty(&result.summary)?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bayes::NoiseModel;

    fn two_hypothesis_problem() -> Problem {
        let labels = vec![
            vec![
                ActionSet::singleton(0),
                ActionSet::singleton(0),
                ActionSet::singleton(1),
            ],
            vec![
                ActionSet::singleton(0),
                ActionSet::singleton(0),
                ActionSet::singleton(0),
            ],
        ];
        let space = HypothesisSpace::from_labels(3, 2, labels, &[0.5, 0.5]).unwrap();
        Problem::from_space(space, 1)
    }

    fn settings(kind: StrategyKind, steps: usize) -> RunSettings {
        RunSettings {
            strategy: StrategyConfig::new(kind, 0),
            feedback: Feedback::Action,
            num_trials: 20,
            num_steps: steps,
            oracle_noise: OracleNoise::WrongAction(0.0),
            sigma: 0.0,
            noise: NoiseModel::aggregated(3, 2, 0.1, 0.1).unwrap(),
            master_seed: 5,
            record_timing: false,
            workers: Some(2),
        }
    }

    #[test]
    fn noiseless_single_query_identifies_truth() {
        let problem = two_hypothesis_problem();
        let rows = run_trials(&problem, &settings(StrategyKind::GbsV2, 1)).unwrap();
        assert_eq!(rows.len(), 40);
        for r in rows.iter().filter(|r| r.step == 0) {
            // Uniform prior: MAP is index 0, the wrong hypothesis.
            assert!(!r.map_correct);
            assert!((r.policy_accuracy - 2.0 / 3.0).abs() < 1e-12);
        }
        for r in rows.iter().filter(|r| r.step == 1) {
            assert!(r.map_correct);
            assert_eq!(r.queried_cell, Some(1));
            assert_eq!(r.policy_accuracy, 1.0);
        }
    }

    #[test]
    fn zero_steps_gives_prior_rows() {
        let rows = run_trials(&two_hypothesis_problem(), &settings(StrategyKind::Random, 0)).unwrap();
        assert_eq!(rows.len(), 20);
        assert!(rows.iter().all(|r| r.obs_kind == ObsKind::None && r.step == 0));
    }

    #[test]
    fn stop_rows_do_not_update() {
        let mut s = settings(StrategyKind::GbsV3, 5);
        s.strategy.c_hat = Some(0.75);
        let rows = run_trials(&two_hypothesis_problem(), &s).unwrap();
        let trial0: Vec<&StepRecord> = rows.iter().filter(|r| r.trial == 0).collect();
        assert_eq!(trial0[1].obs_kind, ObsKind::Action);
        assert!(trial0[2..].iter().all(|r| r.obs_kind == ObsKind::Stop));
        assert!(trial0[2..]
            .iter()
            .all(|r| r.posterior_mass_true == trial0[1].posterior_mass_true));
    }

    #[test]
    fn csv_format() {
        let rows = run_trials(&two_hypothesis_problem(), &settings(StrategyKind::GbsV2, 1)).unwrap();
        let mut out = Vec::new();
        write_csv(&rows[..2], &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], CSV_HEADER);
        assert!(lines[1].starts_with("0,0,,none,,"));
        assert!(lines[2].starts_with("0,1,1,action,0,1,nan,"));
        assert!(lines[2].ends_with(",1,0"));
    }
}
