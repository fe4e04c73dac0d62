use gbsirl::experiment::{
    prepare_problem, run_experiment, run_trials, settings_from_config, write_outputs, ExperimentConfig, FeedbackKind,
    ObsKind, CSV_HEADER,
};
use gbsirl::strategy::StrategyKind;

fn small(strategy: StrategyKind) -> ExperimentConfig {
    ExperimentConfig {
        domain: "random-8x3".into(),
        strategy,
        pool_size: 40,
        num_trials: 12,
        num_steps: 25,
        beta_hat: 0.15,
        master_seed: 4,
        ..Default::default()
    }
}

#[test]
fn trials_do_not_depend_on_each_other() {
    let config = small(StrategyKind::GbsV1);
    let (_, problem) = prepare_problem(&config).unwrap();
    let mut settings = settings_from_config(&config, &problem).unwrap();
    let all = run_trials(&problem, &settings).unwrap();

    // A later trial alone, with the seed shifted to keep its stream.
    settings.num_trials = 1;
    settings.master_seed += 7;
    let alone = run_trials(&problem, &settings).unwrap();
    let expected: Vec<_> = all.iter().filter(|r| r.trial == 7).collect();
    assert_eq!(alone.len(), expected.len());
    for (a, b) in alone.iter().zip(expected) {
        assert_eq!(
            (a.step, a.queried_cell, a.obs_value, a.c_t.to_bits()),
            (b.step, b.queried_cell, b.obs_value, b.c_t.to_bits())
        );
    }

    settings.num_trials = 12;
    settings.master_seed = config.master_seed;
    settings.workers = Some(3);
    assert_eq!(run_trials(&problem, &settings).unwrap(), all);
}

#[test]
fn posterior_mass_on_truth_grows_for_gbs() {
    for strategy in [StrategyKind::GbsV1, StrategyKind::GbsV2] {
        let mut config = small(strategy);
        config.num_trials = 200;
        config.num_steps = 100;
        let summary = run_experiment(&config).unwrap().summary;
        let start = summary.steps[0].posterior_mass_true.mean;
        let end = summary.steps[100].posterior_mass_true.mean;
        assert!(end >= start, "{strategy:?}: {start} -> {end}");
    }
}

#[test]
fn every_strategy_and_feedback_runs() {
    for strategy in [
        StrategyKind::GbsV1,
        StrategyKind::GbsV2,
        StrategyKind::Random,
        StrategyKind::Iqbc,
    ] {
        for feedback in [FeedbackKind::Action, FeedbackKind::Reward, FeedbackKind::Mixed] {
            let config = ExperimentConfig {
                feedback,
                sigma: 0.1,
                num_trials: 3,
                ..small(strategy)
            };
            let result = run_experiment(&config).unwrap();
            assert_eq!(result.records.len(), 3 * 26);
            let kinds: Vec<ObsKind> = result.records.iter().map(|r| r.obs_kind).collect();
            match feedback {
                FeedbackKind::Action => assert!(!kinds.contains(&ObsKind::Reward)),
                FeedbackKind::Reward => assert!(!kinds.contains(&ObsKind::Action)),
                FeedbackKind::Mixed => assert!(kinds.contains(&ObsKind::Action) && kinds.contains(&ObsKind::Reward)),
            }
        }
    }
}

#[test]
fn outputs_are_written_next_to_each_other() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("out/run.csv");
    let result = run_experiment(&small(StrategyKind::GbsV2)).unwrap();
    write_outputs(&result, &csv).unwrap();
    let text = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().next(), Some(CSV_HEADER));
    assert_eq!(text.lines().count(), 1 + 12 * 26);
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("out/run.csv.summary.json")).unwrap()).unwrap();
    assert_eq!(summary["num_trials"], 12);
}

#[test]
fn config_round_trips_through_toml() {
    let config = ExperimentConfig {
        c_hat: Some(0.8),
        strategy: StrategyKind::GbsV3,
        ..small(StrategyKind::GbsV3)
    };
    let text = config.to_toml_string().unwrap();
    assert_eq!(ExperimentConfig::from_toml_str(&text).unwrap(), config);
}
