use std::time::{Duration, Instant};

use fts_core::cohort::{generate_synthetic_cohort, SyntheticSpec, Trait};
use fts_core::engine::{
    run_simulation, run_simulation_with, RunOptions, SessionConfig, SimulationResult,
};
use fts_core::WeightVector;
use serde_json::Value;

/// Every numeric leaf under `deltas` except rank bookkeeping.
fn delta_leaves(v: &Value, key: &str, out: &mut Vec<(String, Value)>) {
    match v {
        Value::Object(map) => {
            for (k, child) in map {
                if matches!(k.as_str(), "rank_a" | "rank_b" | "score_a" | "score_b") {
                    continue;
                }
                delta_leaves(child, k, out);
            }
        }
        Value::Array(items) => items.iter().for_each(|c| delta_leaves(c, key, out)),
        Value::Number(_) | Value::Null => out.push((key.to_string(), v.clone())),
        _ => {}
    }
}

#[test]
fn default_sized_run_finishes_within_a_minute() {
    let cohort = generate_synthetic_cohort(&SyntheticSpec::default(), 42).unwrap();
    let config = SessionConfig::new(
        WeightVector::only(Trait::Reasoning),
        WeightVector::equal(),
        42,
    );
    let start = Instant::now();
    let result = run_simulation(&cohort, &config).unwrap();
    let elapsed = start.elapsed();
    assert!(elapsed < Duration::from_secs(60), "took {elapsed:?}");
    assert_eq!(result.report.model_a.predictions.len(), 2000);
    assert_eq!(result.datasets.a.positive_count(), 100);
}

#[test]
fn identical_weights_give_zero_deltas() {
    let cohort = generate_synthetic_cohort(&SyntheticSpec::default().with_size(800), 9).unwrap();
    let w = WeightVector::new([2.0, 1.0, 0.0, 3.0, 1.0]).unwrap();
    let result = run_simulation(&cohort, &SessionConfig::new(w, w, 77)).unwrap();
    assert_eq!(result.report.model_a, result.report.model_b);

    let deltas = serde_json::to_value(&result.report.deltas).unwrap();
    let mut leaves = Vec::new();
    delta_leaves(&deltas, "deltas", &mut leaves);
    assert!(!leaves.is_empty());
    for (key, value) in leaves {
        // undefined only where both sides are undefined, which the equality
        // of the two model reports already guarantees
        if let Value::Number(n) = value {
            assert_eq!(n.as_f64(), Some(0.0), "{key}");
        }
    }
}

#[test]
fn repeated_runs_serialize_identically() {
    let cohort = generate_synthetic_cohort(&SyntheticSpec::default().with_size(500), 3).unwrap();
    let config = SessionConfig::new(
        WeightVector::only(Trait::Memory),
        WeightVector::only(Trait::BehavioralRestraint),
        42,
    );
    let first = run_simulation(&cohort, &config).unwrap().to_json();
    let second = run_simulation(&cohort, &config).unwrap().to_json();
    let sequential = run_simulation_with(
        &cohort,
        &config,
        RunOptions {
            concurrent: false,
            ..RunOptions::default()
        },
    )
    .unwrap()
    .to_json();
    assert_eq!(first, second);
    assert_eq!(first, sequential);
    assert!(first.ends_with('\n'));
}

#[test]
fn echoed_config_reproduces_the_document() {
    let cohort = generate_synthetic_cohort(&SyntheticSpec::default().with_size(400), 12).unwrap();
    let mut config = SessionConfig::new(
        WeightVector::new([1.0, 0.5, 0.0, 0.0, 2.0]).unwrap(),
        WeightVector::equal(),
        1234,
    );
    config.train.c = 2.0;
    config.policy.positive_count = 40;
    let original = run_simulation(&cohort, &config).unwrap().to_json();

    let parsed: SimulationResult = serde_json::from_str(&original).unwrap();
    assert_eq!(parsed.config.cohort.fingerprint, cohort.fingerprint());
    let replay = run_simulation(&cohort, &parsed.config.session_config())
        .unwrap()
        .to_json();
    assert_eq!(original, replay);
}

#[test]
fn different_master_seeds_change_the_labels() {
    let cohort = generate_synthetic_cohort(&SyntheticSpec::default(), 1).unwrap();
    let w = WeightVector::equal();
    let a = run_simulation(&cohort, &SessionConfig::new(w, w, 1)).unwrap();
    let b = run_simulation(&cohort, &SessionConfig::new(w, w, 2)).unwrap();
    assert_eq!(a.datasets.a.top_subset_ids, b.datasets.a.top_subset_ids);
    assert_ne!(a.datasets.a.labels, b.datasets.a.labels);
}
