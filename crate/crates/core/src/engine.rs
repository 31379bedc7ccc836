//! End-to-end session: one cohort, two weight vectors, one comparison.
//!
//! For each target-variable definition (A and B) the pipeline runs
//! composite scoring → labeling → stratified split + SVM training →
//! prediction, then both sides are compared.
//!
//! Seeds come from the master seed via [`derive_seed`](crate::rng::derive_seed):
//! `labeling = derive(master, "label")` and `split = derive(master, "split")`.
//! A and B share both, so two identical definitions yield identical
//! pipelines and any difference between A and B comes from the weights alone.

use std::fmt;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::cohort::Cohort;
use crate::metrics::{compare, ComparisonReport, MetricsError, ModelRun};
use crate::rng::derive_seed;
use crate::svm::{predict_all, train, LinearModel, Prediction, SvmError, TrainConfig};
use crate::target::{
    assign_labels, composite_scores, LabeledDataset, LabelingPolicy, TargetError, WeightVector,
};

pub const RESULT_SCHEMA: &str = "fts.simulation_result/v1";
pub const LABEL_SEED_TAG: &str = "label";
pub const SPLIT_SEED_TAG: &str = "split";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SessionConfig {
    pub weights_a: WeightVector,
    pub weights_b: WeightVector,
    #[serde(default)]
    pub policy: LabelingPolicy,
    /// `split_seed` is ignored; it is always derived from `master_seed`.
    #[serde(default)]
    pub train: TrainConfig,
    pub master_seed: u64,
}

impl SessionConfig {
    pub fn new(weights_a: WeightVector, weights_b: WeightVector, master_seed: u64) -> Self {
        Self {
            weights_a,
            weights_b,
            policy: LabelingPolicy::default(),
            train: TrainConfig::default(),
            master_seed,
        }
    }

    pub fn derived_seeds(&self) -> DerivedSeeds {
        DerivedSeeds {
            labeling: derive_seed(self.master_seed, LABEL_SEED_TAG),
            split: derive_seed(self.master_seed, SPLIT_SEED_TAG),
        }
    }

    fn effective_train(&self) -> TrainConfig {
        TrainConfig {
            split_seed: self.derived_seeds().split,
            ..self.train.clone()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DerivedSeeds {
    pub labeling: u64,
    pub split: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CohortRef {
    pub fingerprint: String,
    pub size: usize,
}

/// The effective configuration, sufficient to re-run the session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigEcho {
    pub cohort: CohortRef,
    pub weights_a: WeightVector,
    pub weights_b: WeightVector,
    pub policy: LabelingPolicy,
    pub train: TrainConfig,
    pub master_seed: u64,
    pub derived_seeds: DerivedSeeds,
}

impl ConfigEcho {
    pub fn session_config(&self) -> SessionConfig {
        SessionConfig {
            weights_a: self.weights_a,
            weights_b: self.weights_b,
            policy: self.policy.clone(),
            train: self.train.clone(),
            master_seed: self.master_seed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Variant {
    A,
    B,
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::A => "A",
            Variant::B => "B",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Validating,
    Scoring,
    Labeling,
    Training,
    Predicting,
    Comparing,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::Validating => "validating",
            Stage::Scoring => "scoring",
            Stage::Labeling => "labeling",
            Stage::Training => "training",
            Stage::Predicting => "predicting",
            Stage::Comparing => "comparing",
        })
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum StageError {
    #[error(transparent)]
    Target(#[from] TargetError),
    #[error(transparent)]
    Svm(#[from] SvmError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub struct EngineError {
    pub variant: Option<Variant>,
    pub stage: Stage,
    #[source]
    pub source: StageError,
}

impl fmt::Display for EngineError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.variant {
            Some(v) => write!(f, "model {v}, {} stage: {}", self.stage, self.source),
            None => write!(f, "{} stage: {}", self.stage, self.source),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pair<T> {
    pub a: T,
    pub b: T,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Timing {
    pub model_a: Duration,
    pub model_b: Duration,
    pub total: Duration,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationResult {
    pub schema: String,
    pub config: ConfigEcho,
    pub datasets: Pair<LabeledDataset>,
    pub models: Pair<LinearModel>,
    pub report: ComparisonReport,
    pub warnings: Vec<String>,
    /// Wall-clock timings; not serialized so documents stay reproducible.
    #[serde(skip)]
    pub timing: Timing,
}

impl SimulationResult {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string(self).expect("result serializes");
        s.push('\n');
        s
    }
}

#[derive(Clone, Copy)]
pub struct RunOptions<'a> {
    /// Run the A and B pipelines on separate threads.
    pub concurrent: bool,
    pub progress: Option<&'a (dyn Fn(Option<Variant>, Stage) + Sync)>,
}

impl Default for RunOptions<'_> {
    fn default() -> Self {
        Self {
            concurrent: true,
            progress: None,
        }
    }
}

struct PipelineOutput {
    dataset: LabeledDataset,
    model: LinearModel,
    predictions: Vec<Prediction>,
    elapsed: Duration,
}

fn run_pipeline(
    cohort: &Cohort,
    variant: Variant,
    weights: &WeightVector,
    config: &SessionConfig,
    options: &RunOptions<'_>,
) -> Result<PipelineOutput, EngineError> {
    let started = Instant::now();
    let fail = |stage: Stage| {
        move |e: StageError| EngineError {
            variant: Some(variant),
            stage,
            source: e,
        }
    };
    let note = |stage: Stage| {
        if let Some(cb) = options.progress {
            cb(Some(variant), stage);
        }
    };
    let seeds = config.derived_seeds();

    note(Stage::Scoring);
    let scored = composite_scores(cohort, weights);
    note(Stage::Labeling);
    let mut dataset = assign_labels(&scored, &config.policy, seeds.labeling)
        .map_err(|e| fail(Stage::Labeling)(e.into()))?;
    dataset.cohort_fingerprint = cohort.fingerprint().to_string();
    note(Stage::Training);
    let model = train(&dataset, cohort, &config.effective_train())
        .map_err(|e| fail(Stage::Training)(e.into()))?;
    note(Stage::Predicting);
    let predictions = predict_all(&model, cohort).map_err(|e| fail(Stage::Predicting)(e.into()))?;
    Ok(PipelineOutput {
        dataset,
        model,
        predictions,
        elapsed: started.elapsed(),
    })
}

pub fn run_simulation(
    cohort: &Cohort,
    config: &SessionConfig,
) -> Result<SimulationResult, EngineError> {
    run_simulation_with(cohort, config, RunOptions::default())
}

pub fn run_simulation_with(
    cohort: &Cohort,
    config: &SessionConfig,
    options: RunOptions<'_>,
) -> Result<SimulationResult, EngineError> {
    let started = Instant::now();
    let invalid = |source: StageError| EngineError {
        variant: None,
        stage: Stage::Validating,
        source,
    };
    if let Some(cb) = options.progress {
        cb(None, Stage::Validating);
    }
    config.policy.validate().map_err(|e| invalid(e.into()))?;
    config.train.validate().map_err(|e| invalid(e.into()))?;

    let (a, b) = if options.concurrent {
        std::thread::scope(|scope| {
            let handle_a = scope
                .spawn(|| run_pipeline(cohort, Variant::A, &config.weights_a, config, &options));
            let b = run_pipeline(cohort, Variant::B, &config.weights_b, config, &options);
            let a = handle_a.join().expect("pipeline A panicked");
            (a, b)
        })
    } else {
        (
            run_pipeline(cohort, Variant::A, &config.weights_a, config, &options),
            run_pipeline(cohort, Variant::B, &config.weights_b, config, &options),
        )
    };
    let (a, b) = (a?, b?);

    if let Some(cb) = options.progress {
        cb(None, Stage::Comparing);
    }
    let run_a = ModelRun {
        dataset: &a.dataset,
        model: &a.model,
        predictions: &a.predictions,
    };
    let run_b = ModelRun {
        dataset: &b.dataset,
        model: &b.model,
        predictions: &b.predictions,
    };
    let report = compare(cohort, &run_a, &run_b).map_err(|e| EngineError {
        variant: None,
        stage: Stage::Comparing,
        source: e.into(),
    })?;

    let warnings = [(Variant::A, &a.model), (Variant::B, &b.model)]
        .into_iter()
        .filter_map(|(v, m)| m.warning().map(|w| format!("model {v}: {w}")))
        .collect();

    Ok(SimulationResult {
        schema: RESULT_SCHEMA.to_string(),
        config: ConfigEcho {
            cohort: CohortRef {
                fingerprint: cohort.fingerprint().to_string(),
                size: cohort.len(),
            },
            weights_a: config.weights_a,
            weights_b: config.weights_b,
            policy: config.policy.clone(),
            train: config.effective_train(),
            master_seed: config.master_seed,
            derived_seeds: config.derived_seeds(),
        },
        timing: Timing {
            model_a: a.elapsed,
            model_b: b.elapsed,
            total: started.elapsed(),
        },
        datasets: Pair {
            a: a.dataset,
            b: b.dataset,
        },
        models: Pair {
            a: a.model,
            b: b.model,
        },
        report,
        warnings,
    })
}
