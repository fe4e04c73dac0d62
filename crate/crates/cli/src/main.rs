//! Command-line front end for the active IRL experiments.

use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use gbsirl::cache::{build_space_cached, cache_dir_from_env, space_key, space_path, CACHE_DIR_ENV};
use gbsirl::env;
use gbsirl::experiment::{
    build_pool, prepare_problem, run_experiment, supermartingale_report, write_csv, write_outputs, ExperimentConfig,
};
use gbsirl::hypothesis::sparsity_weights;
use gbsirl::mdp::{greedy_sets, solve_q, DEFAULT_TIE_TOL, DEFAULT_TOL};
use gbsirl::oracle::ExpertOracle;
use gbsirl::strategy::compute_bound;

#[derive(Parser)]
#[command(
    name = "gbsirl",
    version,
    about = "Active inverse reinforcement learning experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve a domain's true reward and print Q* with the greedy sets.
    Solve {
        domain: String,
        /// Seed for random domains.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = DEFAULT_TOL)]
        tol: f64,
        #[arg(long, default_value_t = DEFAULT_TIE_TOL)]
        tie_tol: f64,
        /// Write to a file instead of stdout.
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
    /// Run the experiment described by a config file.
    Run {
        config: PathBuf,
        /// CSV destination; overrides `output_path` in the config.
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
    /// Print the convergence-bound parameters for a config.
    Bound { config: PathBuf },
    /// Domain registry.
    Env {
        #[command(subcommand)]
        command: EnvCommand,
    },
    /// Hypothesis-space cache.
    Space {
        #[command(subcommand)]
        command: SpaceCommand,
    },
}

#[derive(Subcommand)]
enum EnvCommand {
    /// List domain names.
    List,
}

#[derive(Subcommand)]
enum SpaceCommand {
    /// Build a domain's hypothesis space and store it in the cache.
    Build(SpaceBuild),
}

#[derive(Args)]
struct SpaceBuild {
    domain: String,
    /// Number of rewards in the pool, true reward included.
    #[arg(long, default_value_t = env::DEFAULT_POOL_SIZE)]
    pool: usize,
    /// Pool seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Seed for random domains.
    #[arg(long, default_value_t = 0)]
    domain_seed: u64,
    #[arg(long, default_value_t = DEFAULT_TIE_TOL)]
    tie_tol: f64,
    /// Cache directory; defaults to $GBSIRL_CACHE_DIR.
    #[arg(long)]
    cache_dir: Option<PathBuf>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match dispatch(Cli::parse().command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Solve {
            domain,
            seed,
            tol,
            tie_tol,
            output,
        } => solve(&domain, seed, tol, tie_tol, output.as_deref()),
        Command::Run { config, output } => run(&config, output),
        Command::Bound { config } => bound(&config),
        Command::Env {
            command: EnvCommand::List,
        } => {
            for name in env::list_domains() {
                println!("{name}");
            }
            Ok(())
        }
        Command::Space {
            command: SpaceCommand::Build(args),
        } => space_build(&args),
    }
}

fn open_output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            std::fs::File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn solve(name: &str, seed: u64, tol: f64, tie_tol: f64, output: Option<&Path>) -> Result<()> {
    let domain = env::domain(name, seed)?;
    let q = solve_q(&domain.mdp, &domain.true_reward, tol)?;
    let sets = greedy_sets(&q, tie_tol);
    log::info!("solved {name}: residual {:e}", q.converged_residual);
    let mut out = open_output(output)?;
    let na = domain.mdp.num_actions();
    let header: Vec<String> = (0..na).map(|a| format!("q{a}")).collect();
    writeln!(out, "state,{},greedy", header.join(","))?;
    for (x, set) in sets.iter().enumerate() {
        let row: Vec<String> = q.row(x).iter().map(|v| v.to_string()).collect();
        let greedy: Vec<String> = set.iter().map(|a| a.to_string()).collect();
        writeln!(out, "{x},{},{}", row.join(","), greedy.join(" "))?;
    }
    out.flush()?;
    Ok(())
}

fn run(config_path: &Path, output: Option<PathBuf>) -> Result<()> {
    let config =
        ExperimentConfig::from_file(config_path).with_context(|| format!("reading {}", config_path.display()))?;
    let destination = output.or_else(|| config.output_path.clone());
    let result = run_experiment(&config)?;
    match &destination {
        Some(path) => write_outputs(&result, path)?,
        None => {
            let mut out = BufWriter::new(io::stdout().lock());
            write_csv(&result.records, &mut out)?;
            out.flush()?;
        }
    }
    let summary = &result.summary;
    let last = summary.steps.last().expect("step 0 is always recorded");
    let martingale = supermartingale_report(&result.records);
    eprintln!(
        "{} trials x {} steps, |H| = {}: final accuracy {:.3} +- {:.3}, MAP correct {:.3}, \
         queries to 90% {:.2} +- {:.2}, mean C ratio {:.3}",
        summary.num_trials,
        summary.num_steps,
        summary.hypothesis_count,
        last.policy_accuracy.mean,
        last.policy_accuracy.stderr,
        last.map_correct.mean,
        summary.queries_to_90.mean,
        summary.queries_to_90.stderr,
        martingale.mean_ratio,
    );
    if let Some(path) = destination {
        eprintln!("wrote {}", path.display());
    }
    Ok(())
}

fn bound(config_path: &Path) -> Result<()> {
    let config =
        ExperimentConfig::from_file(config_path).with_context(|| format!("reading {}", config_path.display()))?;
    let (_, problem) = prepare_problem(&config)?;
    let (ns, na) = (problem.space.num_states(), problem.space.num_actions());
    let oracle = ExpertOracle::from_optimal_sets(
        na,
        problem.optimal_sets.clone(),
        problem.true_reward.clone(),
        config.oracle_noise(na)?,
        config.sigma,
        config.master_seed,
    )?;
    let noise = config.noise_model(ns, na)?;
    let params = compute_bound(&problem.space, &noise, &oracle, config.delta)?;
    println!("{}", serde_json::to_string_pretty(&params)?);
    if params.vacuous {
        eprintln!("the bound is vacuous: beta_hat must exceed the oracle's noise level for epsilon > 0");
    }
    Ok(())
}

fn space_build(args: &SpaceBuild) -> Result<()> {
    let Some(dir) = args.cache_dir.clone().or_else(cache_dir_from_env) else {
        bail!("no cache directory: pass --cache-dir or set {CACHE_DIR_ENV}");
    };
    let config = ExperimentConfig {
        domain: args.domain.clone(),
        domain_seed: args.domain_seed,
        pool_size: args.pool,
        pool_seed: args.seed,
        tie_tol: args.tie_tol,
        ..Default::default()
    };
    config.validate()?;
    let (domain, pool, _) = build_pool(&config)?;
    let weights = sparsity_weights(&pool);
    let space = build_space_cached(&domain.mdp, &pool, &weights, args.tie_tol, Some(&dir))?;
    let key = space_key(&domain.mdp, &pool, &weights, args.tie_tol);
    println!(
        "{}: {} hypotheses over {} cells from {} rewards",
        domain.name,
        space.len(),
        space.num_cells(),
        pool.len()
    );
    println!("{}", space_path(&dir, &key).display());
    Ok(())
}
