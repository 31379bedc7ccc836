//! Target-variable definition: trait weights → composite scores → labels.
//!
//! A [`WeightVector`] holds one slider value in `[0, 10]` per trait. The
//! composite score of a candidate is the weighted average of their five trait
//! scores. Labels come from a percentile cut plus weighted sampling:
//!
//! 1. the top `ceil((1 - percentile_cut) * N)` candidates by composite score
//!    form the *top subset* (ties broken by ascending `candidate_id`);
//! 2. if the top subset has at most `positive_count` members, all of them are
//!    labeled 1;
//! 3. otherwise `positive_count` of them are drawn without replacement, the
//!    member at rank `x` of `n` carrying weight
//!    `f(x) = span / (1 - n) * x + (low - high * n) / (1 - n)`, which runs
//!    linearly from `high` (0.99) at `x = 1` to `low` (0.01) at `x = n`;
//! 4. everyone else is labeled 0.
//!
//! Each draw picks `u = unit_f64() * total_remaining_weight` and takes the
//! first remaining member (in rank order) whose cumulative weight exceeds
//! `u`; the chosen member is removed before the next draw.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::cohort::{Cohort, Trait};
use crate::rng::{seeded, unit_f64};

pub const SLIDER_MAX: f64 = 10.0;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TargetError {
    #[error("all trait weights are zero")]
    ZeroWeightVector,
    #[error("weight for {trait_name} must be a finite value in [0, {SLIDER_MAX}], got {value}")]
    WeightOutOfRange { trait_name: Trait, value: f64 },
    #[error("expected five comma-separated weights, got {0:?}")]
    MalformedWeights(String),
    #[error("sampling weight undefined for rank {x} of {n}")]
    DomainError { x: usize, n: usize },
    #[error("invalid labeling policy: {0}")]
    InvalidPolicy(String),
    #[error("labeling needs at least 2 candidates, got {0}")]
    TooFewCandidates(usize),
}

/// Trait importance, one slider per trait.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "WeightFields", into = "WeightFields")]
pub struct WeightVector {
    weights: [f64; Trait::COUNT],
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct WeightFields {
    memory: f64,
    information_processing_speed: f64,
    reasoning: f64,
    attention: f64,
    behavioral_restraint: f64,
}

impl TryFrom<WeightFields> for WeightVector {
    type Error = TargetError;

    fn try_from(f: WeightFields) -> Result<Self, Self::Error> {
        WeightVector::new([
            f.memory,
            f.information_processing_speed,
            f.reasoning,
            f.attention,
            f.behavioral_restraint,
        ])
    }
}

impl From<WeightVector> for WeightFields {
    fn from(w: WeightVector) -> Self {
        let [memory, information_processing_speed, reasoning, attention, behavioral_restraint] =
            w.weights;
        WeightFields {
            memory,
            information_processing_speed,
            reasoning,
            attention,
            behavioral_restraint,
        }
    }
}

impl WeightVector {
    /// Weights in canonical trait order.
    pub fn new(weights: [f64; Trait::COUNT]) -> Result<Self, TargetError> {
        for t in Trait::ALL {
            let value = weights[t.index()];
            if !(value.is_finite() && (0.0..=SLIDER_MAX).contains(&value)) {
                return Err(TargetError::WeightOutOfRange {
                    trait_name: t,
                    value,
                });
            }
        }
        if weights.iter().all(|&w| w == 0.0) {
            return Err(TargetError::ZeroWeightVector);
        }
        Ok(Self { weights })
    }

    /// All weight on one trait.
    pub fn only(t: Trait) -> Self {
        let mut weights = [0.0; Trait::COUNT];
        weights[t.index()] = 1.0;
        Self { weights }
    }

    pub fn equal() -> Self {
        Self {
            weights: [1.0; Trait::COUNT],
        }
    }

    pub fn get(&self, t: Trait) -> f64 {
        self.weights[t.index()]
    }

    pub fn as_array(&self) -> [f64; Trait::COUNT] {
        self.weights
    }

    /// Weighted average of the given trait scores.
    pub fn composite(&self, trait_scores: &[f64; Trait::COUNT]) -> f64 {
        let total: f64 = self.weights.iter().sum();
        let weighted: f64 = self
            .weights
            .iter()
            .zip(trait_scores)
            .map(|(w, s)| w * s)
            .sum();
        weighted / total
    }
}

impl FromStr for WeightVector {
    type Err = TargetError;

    /// Five comma-separated reals in canonical trait order.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.split(',').map(str::trim).collect();
        if parts.len() != Trait::COUNT {
            return Err(TargetError::MalformedWeights(s.to_string()));
        }
        let mut weights = [0.0; Trait::COUNT];
        for (slot, part) in weights.iter_mut().zip(parts) {
            *slot = part
                .parse()
                .map_err(|_| TargetError::MalformedWeights(s.to_string()))?;
        }
        WeightVector::new(weights)
    }
}

impl fmt::Display for WeightVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.weights.iter().map(|w| w.to_string()).collect();
        f.write_str(&parts.join(","))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredCandidate {
    pub candidate_id: String,
    pub composite_score: f64,
    pub rank: usize,
}

/// Ranks the cohort by descending composite score; ties go to the smaller
/// `candidate_id`. The result is in rank order.
pub fn composite_scores(cohort: &Cohort, weights: &WeightVector) -> Vec<ScoredCandidate> {
    let mut scored: Vec<ScoredCandidate> = cohort
        .profiles()
        .iter()
        .map(|p| ScoredCandidate {
            candidate_id: p.candidate_id.clone(),
            composite_score: weights.composite(&p.trait_scores),
            rank: 0,
        })
        .collect();
    rank_descending(&mut scored);
    scored
}

fn rank_descending(scored: &mut [ScoredCandidate]) {
    scored.sort_by(|a, b| {
        b.composite_score
            .total_cmp(&a.composite_score)
            .then_with(|| a.candidate_id.cmp(&b.candidate_id))
    });
    for (i, s) in scored.iter_mut().enumerate() {
        s.rank = i + 1;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LabelingPolicy {
    pub percentile_cut: f64,
    pub positive_count: usize,
    pub weight_high: f64,
    pub weight_low: f64,
    pub weight_span: f64,
}

impl Default for LabelingPolicy {
    fn default() -> Self {
        Self {
            percentile_cut: 0.85,
            positive_count: 100,
            weight_high: 0.99,
            weight_low: 0.01,
            weight_span: 0.98,
        }
    }
}

impl LabelingPolicy {
    pub fn validate(&self) -> Result<(), TargetError> {
        let bad = |m: String| Err(TargetError::InvalidPolicy(m));
        if !(self.percentile_cut > 0.0 && self.percentile_cut < 1.0) {
            return bad(format!(
                "percentile_cut must be in (0, 1), got {}",
                self.percentile_cut
            ));
        }
        if self.positive_count == 0 {
            return bad("positive_count must be at least 1".into());
        }
        let finite = [self.weight_high, self.weight_low, self.weight_span]
            .iter()
            .all(|v| v.is_finite());
        if !finite || self.weight_low < 0.0 || self.weight_low >= self.weight_high {
            return bad(format!(
                "need 0 <= weight_low < weight_high, got {} and {}",
                self.weight_low, self.weight_high
            ));
        }
        if (self.weight_span - (self.weight_high - self.weight_low)).abs() > 1e-12 {
            return bad(format!(
                "weight_span {} must equal weight_high - weight_low",
                self.weight_span
            ));
        }
        Ok(())
    }

    /// Size of the top subset for a cohort of `n` candidates.
    pub fn top_subset_size(&self, n: usize) -> usize {
        // (1 - 0.85) * 2000 evaluates to 300.00000000000006; the slack keeps
        // representation error from adding a candidate.
        let exact = (1.0 - self.percentile_cut) * n as f64;
        ((exact - 1e-9).ceil() as usize).clamp(1, n)
    }

    /// The linear rank weight `f(x)` for rank `x` in a pool of `n`.
    pub fn sampling_weight(&self, x: usize, n: usize) -> Result<f64, TargetError> {
        if n < 2 || x < 1 || x > n {
            return Err(TargetError::DomainError { x, n });
        }
        let (x, n) = (x as f64, n as f64);
        Ok(self.weight_span / (1.0 - n) * x + (self.weight_low - self.weight_high * n) / (1.0 - n))
    }
}

/// `f(x) = 0.98/(1-n)·x + (0.01-0.99n)/(1-n)` with the default policy.
pub fn sampling_weight(x: usize, n: usize) -> Result<f64, TargetError> {
    LabelingPolicy::default().sampling_weight(x, n)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledDataset {
    pub cohort_fingerprint: String,
    pub labels: BTreeMap<String, u8>,
    pub scored: Vec<ScoredCandidate>,
    pub top_subset_ids: Vec<String>,
    pub sampling_seed: u64,
}

impl LabeledDataset {
    pub fn label(&self, candidate_id: &str) -> Option<u8> {
        self.labels.get(candidate_id).copied()
    }

    pub fn positive_ids(&self) -> impl Iterator<Item = &str> {
        self.labels
            .iter()
            .filter(|(_, &l)| l == 1)
            .map(|(id, _)| id.as_str())
    }

    pub fn positive_count(&self) -> usize {
        self.labels.values().filter(|&&l| l == 1).count()
    }
}

/// Labels a ranked list. `scored` must already be in rank order, as returned
/// by [`composite_scores`].
pub fn assign_labels(
    scored: &[ScoredCandidate],
    policy: &LabelingPolicy,
    seed: u64,
) -> Result<LabeledDataset, TargetError> {
    policy.validate()?;
    let n = scored.len();
    if n < 2 {
        return Err(TargetError::TooFewCandidates(n));
    }
    let mut ranked: Vec<ScoredCandidate> = scored.to_vec();
    rank_descending(&mut ranked);

    let top = policy.top_subset_size(n);
    let top_members = &ranked[..top];
    let mut labels: BTreeMap<String, u8> =
        ranked.iter().map(|s| (s.candidate_id.clone(), 0)).collect();

    if top <= policy.positive_count {
        for s in top_members {
            labels.insert(s.candidate_id.clone(), 1);
        }
    } else {
        let mut pool: Vec<(usize, f64)> = (1..=top)
            .map(|x| policy.sampling_weight(x, top).map(|w| (x - 1, w)))
            .collect::<Result<_, _>>()?;
        let mut rng = seeded(seed);
        for _ in 0..policy.positive_count {
            let total: f64 = pool.iter().map(|(_, w)| w).sum();
            let target = unit_f64(&mut rng) * total;
            let mut cumulative = 0.0;
            let mut chosen = pool.len() - 1;
            for (i, (_, w)) in pool.iter().enumerate() {
                cumulative += w;
                if cumulative > target {
                    chosen = i;
                    break;
                }
            }
            let (member, _) = pool.remove(chosen);
            labels.insert(top_members[member].candidate_id.clone(), 1);
        }
    }

    let mut top_subset_ids: Vec<String> =
        top_members.iter().map(|s| s.candidate_id.clone()).collect();
    top_subset_ids.sort();
    Ok(LabeledDataset {
        cohort_fingerprint: String::new(),
        labels,
        scored: ranked,
        top_subset_ids,
        sampling_seed: seed,
    })
}

/// [`composite_scores`] followed by [`assign_labels`], tagged with the cohort.
pub fn label_cohort(
    cohort: &Cohort,
    weights: &WeightVector,
    policy: &LabelingPolicy,
    seed: u64,
) -> Result<LabeledDataset, TargetError> {
    let scored = composite_scores(cohort, weights);
    let mut dataset = assign_labels(&scored, policy, seed)?;
    dataset.cohort_fingerprint = cohort.fingerprint().to_string();
    Ok(dataset)
}
