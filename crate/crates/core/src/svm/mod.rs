//! Linear SVM over the five trait scores.

pub mod solver;

use serde::{Deserialize, Serialize};

use crate::cohort::{Cohort, Trait};
use crate::rng::{seeded, shuffle};
use crate::target::LabeledDataset;
use solver::{solve, Problem, SolverParams};

pub const MODEL_SCHEMA: &str = "fts.linear_model/v1";

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SvmError {
    #[error("dataset has a single class ({positives} positives, {negatives} negatives)")]
    SingleClassDataset { positives: usize, negatives: usize },
    #[error("training split lacks one class")]
    SingleClassTrainingSplit,
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error("candidate {0} is labeled but not in the cohort")]
    MissingCandidate(String),
    #[error("dataset was labeled on a different cohort")]
    CohortMismatch,
    #[error("optimizer stopped after {iterations} iterations at objective {objective}")]
    NonConvergence { objective: f64, iterations: usize },
    #[error("model has non-finite parameters")]
    NonFiniteModel,
    #[error("model document: {0}")]
    Format(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub c: f64,
    /// Weight each class's hinge loss by `n / (2 * n_class)`.
    pub class_balance: bool,
    pub tolerance: f64,
    pub max_iterations: usize,
    pub split_fraction: f64,
    pub split_seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            c: 1.0,
            class_balance: true,
            tolerance: 1e-6,
            max_iterations: 10_000,
            split_fraction: 0.8,
            split_seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), SvmError> {
        if !(self.c.is_finite() && self.c > 0.0) {
            return Err(SvmError::InvalidConfig(format!(
                "C must be positive, got {}",
                self.c
            )));
        }
        if !(self.split_fraction > 0.0 && self.split_fraction < 1.0) {
            return Err(SvmError::InvalidConfig(format!(
                "split_fraction must be in (0, 1), got {}",
                self.split_fraction
            )));
        }
        if !(self.tolerance.is_finite() && self.tolerance > 0.0) {
            return Err(SvmError::InvalidConfig(format!(
                "tolerance must be positive, got {}",
                self.tolerance
            )));
        }
        if self.max_iterations == 0 {
            return Err(SvmError::InvalidConfig(
                "max_iterations must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<String>,
    pub test: Vec<String>,
}

/// Per class: shuffle the ids with the split seed (positives first, then
/// negatives, one stream) and send the first `round(fraction * n_class)` to
/// training. Both halves come back sorted by id.
pub fn stratified_split(dataset: &LabeledDataset, config: &TrainConfig) -> Result<Split, SvmError> {
    config.validate()?;
    let positives: Vec<&String> = dataset
        .labels
        .iter()
        .filter(|(_, &l)| l == 1)
        .map(|(id, _)| id)
        .collect();
    let negatives: Vec<&String> = dataset
        .labels
        .iter()
        .filter(|(_, &l)| l != 1)
        .map(|(id, _)| id)
        .collect();
    if positives.is_empty() || negatives.is_empty() {
        return Err(SvmError::SingleClassDataset {
            positives: positives.len(),
            negatives: negatives.len(),
        });
    }
    let mut rng = seeded(config.split_seed);
    let mut train = Vec::new();
    let mut test = Vec::new();
    for mut class in [positives, negatives] {
        shuffle(&mut rng, &mut class);
        let k = (config.split_fraction * class.len() as f64).round() as usize;
        train.extend(class[..k].iter().map(|s| s.to_string()));
        test.extend(class[k..].iter().map(|s| s.to_string()));
    }
    train.sort();
    test.sort();
    Ok(Split { train, test })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Convergence {
    Converged,
    NonConvergence { objective: f64, iterations: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingMetadata {
    pub iterations: usize,
    pub objective: f64,
    pub dual_objective: f64,
    pub convergence: Convergence,
    pub cost_positive: f64,
    pub cost_negative: f64,
    pub config: TrainConfig,
    pub train_ids: Vec<String>,
    pub test_ids: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub schema: String,
    pub features: Vec<Trait>,
    pub feature_weights: [f64; Trait::COUNT],
    pub bias: f64,
    pub metadata: TrainingMetadata,
}

impl LinearModel {
    pub fn decision_score(&self, trait_scores: &[f64; Trait::COUNT]) -> f64 {
        self.feature_weights
            .iter()
            .zip(trait_scores)
            .map(|(w, x)| w * x)
            .sum::<f64>()
            + self.bias
    }

    pub fn is_finite(&self) -> bool {
        self.bias.is_finite() && self.feature_weights.iter().all(|w| w.is_finite())
    }

    /// `Some(NonConvergence)` when the iteration budget ran out.
    pub fn warning(&self) -> Option<SvmError> {
        match self.metadata.convergence {
            Convergence::Converged => None,
            Convergence::NonConvergence {
                objective,
                iterations,
            } => Some(SvmError::NonConvergence {
                objective,
                iterations,
            }),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, SvmError> {
        let model: LinearModel =
            serde_json::from_str(text).map_err(|e| SvmError::Format(e.to_string()))?;
        if model.schema != MODEL_SCHEMA {
            return Err(SvmError::Format(format!(
                "unsupported schema {:?}",
                model.schema
            )));
        }
        if model.features != Trait::ALL {
            return Err(SvmError::Format(
                "feature order must be the canonical trait order".into(),
            ));
        }
        if !model.is_finite() {
            return Err(SvmError::NonFiniteModel);
        }
        Ok(model)
    }
}

/// Trains on the stratified training split. A model that ran out of
/// iterations is still returned; see [`LinearModel::warning`].
pub fn train(
    dataset: &LabeledDataset,
    cohort: &Cohort,
    config: &TrainConfig,
) -> Result<LinearModel, SvmError> {
    if !dataset.cohort_fingerprint.is_empty() && dataset.cohort_fingerprint != cohort.fingerprint()
    {
        return Err(SvmError::CohortMismatch);
    }
    let split = stratified_split(dataset, config)?;
    let mut features = Vec::with_capacity(split.train.len() * Trait::COUNT);
    let mut labels = Vec::with_capacity(split.train.len());
    for id in &split.train {
        let profile = cohort
            .profile(id)
            .ok_or_else(|| SvmError::MissingCandidate(id.clone()))?;
        features.extend_from_slice(&profile.trait_scores);
        labels.push(dataset.label(id) == Some(1));
    }
    let n_pos = labels.iter().filter(|&&l| l).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(SvmError::SingleClassTrainingSplit);
    }
    let n = labels.len() as f64;
    let (cost_positive, cost_negative) = if config.class_balance {
        (n / (2.0 * n_pos as f64), n / (2.0 * n_neg as f64))
    } else {
        (1.0, 1.0)
    };
    let params = SolverParams {
        c: config.c,
        cost_positive,
        cost_negative,
        tolerance: config.tolerance,
        max_iterations: config.max_iterations,
    };
    let out = solve(
        &Problem {
            features: &features,
            dim: Trait::COUNT,
            labels: &labels,
        },
        &params,
    );
    let mut feature_weights = [0.0; Trait::COUNT];
    feature_weights.copy_from_slice(&out.weights);
    let convergence = if out.converged {
        Convergence::Converged
    } else {
        Convergence::NonConvergence {
            objective: out.objective,
            iterations: out.iterations,
        }
    };
    let model = LinearModel {
        schema: MODEL_SCHEMA.to_string(),
        features: Trait::ALL.to_vec(),
        feature_weights,
        bias: out.bias,
        metadata: TrainingMetadata {
            iterations: out.iterations,
            objective: out.objective,
            dual_objective: out.dual_objective,
            convergence,
            cost_positive,
            cost_negative,
            config: config.clone(),
            train_ids: split.train,
            test_ids: split.test,
        },
    };
    if !model.is_finite() {
        return Err(SvmError::NonFiniteModel);
    }
    Ok(model)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub candidate_id: String,
    pub decision_score: f64,
    pub predicted_label: u8,
    pub rank: usize,
}

/// Scores every candidate; `predicted_label` is 1 only for a strictly
/// positive decision score. Returned in rank order (descending score, ties
/// by ascending id).
pub fn predict_all(model: &LinearModel, cohort: &Cohort) -> Result<Vec<Prediction>, SvmError> {
    if !model.is_finite() {
        return Err(SvmError::NonFiniteModel);
    }
    let mut predictions: Vec<Prediction> = cohort
        .profiles()
        .iter()
        .map(|p| {
            let decision_score = model.decision_score(&p.trait_scores);
            Prediction {
                candidate_id: p.candidate_id.clone(),
                decision_score,
                predicted_label: u8::from(decision_score > 0.0),
                rank: 0,
            }
        })
        .collect();
    predictions.sort_by(|a, b| {
        b.decision_score
            .total_cmp(&a.decision_score)
            .then_with(|| a.candidate_id.cmp(&b.candidate_id))
    });
    for (i, p) in predictions.iter_mut().enumerate() {
        p.rank = i + 1;
    }
    Ok(predictions)
}
