use mnm_lab::config::{ExperimentConfig, ExperimentKind};
use mnm_lab::error::{EXIT_BOUND_FAILURE, EXIT_OK};
use mnm_lab::experiments::{emit_ablation, execute, CheckKind};
use mnm_lab::records::{aggregate, SeedLabel};

fn small(kind: ExperimentKind, seeds: Vec<u64>) -> ExperimentConfig {
    let mut config = ExperimentConfig::with_defaults(kind, seeds);
    config.qlearning.episodes = 200;
    config.qlearning.eval_every = 50;
    config
}

#[test]
fn per_seed_records_carry_their_seed() {
    let output = execute(&small(ExperimentKind::GridworldCurves, vec![3, 7])).unwrap();
    let seeds: Vec<u64> = output.per_seed.iter().map(|(s, _)| *s).collect();
    assert_eq!(seeds, [3, 7]);
    for (seed, records) in &output.per_seed {
        assert!(!records.is_empty());
        assert!(records.iter().all(|r| r.seed == SeedLabel::Seed(*seed)));
    }
    assert!(output.summary.iter().all(|r| r.seed == SeedLabel::All));
}

#[test]
fn parallel_and_serial_runs_agree() {
    let config = small(ExperimentKind::GridworldCurves, vec![0, 1, 2]);
    let serial = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .unwrap()
        .install(|| execute(&config).unwrap());
    let parallel = rayon::ThreadPoolBuilder::new()
        .num_threads(3)
        .build()
        .unwrap()
        .install(|| execute(&config).unwrap());
    assert_eq!(serial.per_seed, parallel.per_seed);
    assert_eq!(serial.summary, parallel.summary);
}

#[test]
fn adding_a_seed_leaves_other_seeds_unchanged() {
    let one = execute(&small(ExperimentKind::GridworldCurves, vec![1])).unwrap();
    let two = execute(&small(ExperimentKind::GridworldCurves, vec![0, 1])).unwrap();
    assert_eq!(one.per_seed[0], two.per_seed[1]);
}

#[test]
fn aggregate_matches_output_aggregate() {
    let output = execute(&small(ExperimentKind::GridworldCurves, vec![0, 1, 2])).unwrap();
    let all: Vec<_> = output.per_seed.iter().flat_map(|(_, r)| r.clone()).collect();
    assert_eq!(aggregate(&all), output.aggregate());
}

#[test]
fn ablation_reports_both_findings() {
    let output = emit_ablation(&small(ExperimentKind::GridworldCurves, vec![0])).unwrap();
    assert_eq!(output.kind, ExperimentKind::Ablation);
    assert!(output.check("no_log_worse").is_some());
    assert!(output.check("no_classifier_near").is_some());
    let methods: Vec<String> = output.aggregate().into_iter().map(|r| r.method).collect();
    assert!(methods.iter().any(|m| m == "no_log") && methods.iter().any(|m| m == "no_classifier"));
}

#[test]
fn bound_trace_checks_are_bound_kind_and_pass() {
    let output = execute(&ExperimentConfig::with_defaults(ExperimentKind::BoundTrace, vec![0])).unwrap();
    let bounds: Vec<_> = output.checks.iter().filter(|c| c.kind == CheckKind::Bound).collect();
    assert!(!bounds.is_empty());
    assert!(bounds.iter().all(|c| c.passed), "{bounds:?}");
    assert_eq!(output.exit_code(), EXIT_OK);
}

#[test]
fn failed_bound_check_sets_exit_status() {
    let mut output = execute(&ExperimentConfig::with_defaults(ExperimentKind::BoundTrace, vec![0])).unwrap();
    let check = output.checks.iter_mut().find(|c| c.kind == CheckKind::Bound).unwrap();
    check.passed = false;
    assert_eq!(output.exit_code(), EXIT_BOUND_FAILURE);
}

#[test]
fn failed_finding_does_not_set_exit_status() {
    let mut output = execute(&ExperimentConfig::with_defaults(ExperimentKind::ThreeState, vec![0])).unwrap();
    for c in &mut output.checks {
        assert_eq!(c.kind, CheckKind::Finding);
        c.passed = false;
    }
    assert_eq!(output.exit_code(), EXIT_OK);
}

#[test]
fn summary_records_end_with_one_row_per_check() {
    let output = execute(&ExperimentConfig::with_defaults(ExperimentKind::ThreeState, vec![0])).unwrap();
    let rows = output.summary_records();
    let checks: Vec<_> = rows.iter().filter(|r| r.method == "check").collect();
    assert_eq!(checks.len(), output.checks.len());
    for (row, check) in checks.iter().zip(&output.checks) {
        assert_eq!(row.metric, check.name);
        assert_eq!(row.value, if check.passed { 1.0 } else { 0.0 });
    }
}
