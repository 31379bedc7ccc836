//! Confusion matrices, per-group fairness metrics, label and score
//! distributions, and the A/B comparison report.
//!
//! Rates that would divide zero by zero are carried as [`Rate::UNDEFINED`]
//! (serialized as `null`, displayed as `n/a`) rather than coerced to a number.
//!
//! Two evaluation bases appear in a report:
//! * `held_out`: the model's test split, scored against its own labels
//!   (accuracy, confusion matrix, TPR/FPR/PPV/NPV per group);
//! * `population`: the whole cohort (selection rates, label and score
//!   distributions).

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::cohort::{Attribute, Cohort};
use crate::svm::{LinearModel, Prediction};
use crate::target::{LabeledDataset, ScoredCandidate};

pub const REPORT_SCHEMA: &str = "fts.comparison_report/v1";

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MetricsError {
    #[error("candidate {0} has no prediction or no label")]
    MissingId(String),
    #[error("cohort mismatch: {0}")]
    CohortMismatch(String),
}

/// A rate in `[0, 1]`, or undefined when its denominator is zero.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Rate(Option<f64>);

impl Rate {
    pub const UNDEFINED: Rate = Rate(None);

    pub fn ratio(numerator: u64, denominator: u64) -> Rate {
        if denominator == 0 {
            Rate(None)
        } else {
            Rate(Some(numerator as f64 / denominator as f64))
        }
    }

    pub fn value(self) -> Option<f64> {
        self.0
    }

    pub fn is_defined(self) -> bool {
        self.0.is_some()
    }

    /// `other - self`; undefined if either side is.
    pub fn delta_to(self, other: Rate) -> Rate {
        match (self.0, other.0) {
            (Some(a), Some(b)) => Rate(Some(b - a)),
            _ => Rate(None),
        }
    }
}

impl From<f64> for Rate {
    fn from(v: f64) -> Self {
        if v.is_finite() {
            Rate(Some(v))
        } else {
            Rate(None)
        }
    }
}

impl fmt::Display for Rate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.0 {
            Some(v) => match f.precision() {
                Some(p) => write!(f, "{v:.p$}"),
                None => write!(f, "{v}"),
            },
            None => f.write_str("n/a"),
        }
    }
}

impl Serialize for Rate {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.0.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Rate {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        Ok(Rate(Option::<f64>::deserialize(d)?))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
}

impl ConfusionMatrix {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }

    pub fn selected(&self) -> u64 {
        self.tp + self.fp
    }

    pub fn accuracy(&self) -> Rate {
        Rate::ratio(self.tp + self.tn, self.total())
    }

    pub fn tpr(&self) -> Rate {
        Rate::ratio(self.tp, self.tp + self.fn_)
    }

    pub fn fpr(&self) -> Rate {
        Rate::ratio(self.fp, self.fp + self.tn)
    }

    pub fn ppv(&self) -> Rate {
        Rate::ratio(self.tp, self.tp + self.fp)
    }

    pub fn npv(&self) -> Rate {
        Rate::ratio(self.tn, self.tn + self.fn_)
    }

    pub fn selection_rate(&self) -> Rate {
        Rate::ratio(self.selected(), self.total())
    }

    fn record(&mut self, predicted: u8, label: u8) {
        match (predicted == 1, label == 1) {
            (true, true) => self.tp += 1,
            (true, false) => self.fp += 1,
            (false, true) => self.fn_ += 1,
            (false, false) => self.tn += 1,
        }
    }
}

impl std::ops::Add for ConfusionMatrix {
    type Output = ConfusionMatrix;

    fn add(self, o: ConfusionMatrix) -> ConfusionMatrix {
        ConfusionMatrix {
            tp: self.tp + o.tp,
            fp: self.fp + o.fp,
            fn_: self.fn_ + o.fn_,
            tn: self.tn + o.tn,
        }
    }
}

fn predicted_labels(predictions: &[Prediction]) -> HashMap<&str, u8> {
    predictions
        .iter()
        .map(|p| (p.candidate_id.as_str(), p.predicted_label))
        .collect()
}

fn lookup(
    id: &str,
    predicted: &HashMap<&str, u8>,
    labels: &BTreeMap<String, u8>,
) -> Result<(u8, u8), MetricsError> {
    match (predicted.get(id), labels.get(id)) {
        (Some(&p), Some(&l)) => Ok((p, l)),
        _ => Err(MetricsError::MissingId(id.to_string())),
    }
}

/// Counts predictions against labels over the candidates in `over`.
pub fn confusion(
    predictions: &[Prediction],
    labels: &BTreeMap<String, u8>,
    over: &[String],
) -> Result<ConfusionMatrix, MetricsError> {
    let predicted = predicted_labels(predictions);
    let mut m = ConfusionMatrix::default();
    for id in over {
        let (p, l) = lookup(id, &predicted, labels)?;
        m.record(p, l);
    }
    Ok(m)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupMetrics {
    pub group: String,
    pub count: u64,
    pub selected: u64,
    pub selection_rate: Rate,
    pub tpr: Rate,
    pub fpr: Rate,
    pub ppv: Rate,
    pub npv: Rate,
    pub confusion: ConfusionMatrix,
}

impl GroupMetrics {
    fn from_confusion(group: String, confusion: ConfusionMatrix) -> Self {
        GroupMetrics {
            group,
            count: confusion.total(),
            selected: confusion.selected(),
            selection_rate: confusion.selection_rate(),
            tpr: confusion.tpr(),
            fpr: confusion.fpr(),
            ppv: confusion.ppv(),
            npv: confusion.npv(),
            confusion,
        }
    }
}

/// One entry per group of `attribute` that has members in `over`, sorted by
/// group value.
pub fn group_metrics(
    predictions: &[Prediction],
    labels: &BTreeMap<String, u8>,
    cohort: &Cohort,
    attribute: Attribute,
    over: &[String],
) -> Result<Vec<GroupMetrics>, MetricsError> {
    let predicted = predicted_labels(predictions);
    let mut by_group: BTreeMap<&str, ConfusionMatrix> = BTreeMap::new();
    for id in over {
        let record = cohort
            .record(id)
            .ok_or_else(|| MetricsError::MissingId(id.clone()))?;
        let (p, l) = lookup(id, &predicted, labels)?;
        by_group
            .entry(record.demographic(attribute))
            .or_default()
            .record(p, l);
    }
    Ok(by_group
        .into_iter()
        .map(|(g, m)| GroupMetrics::from_confusion(g.to_string(), m))
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupLabelCount {
    pub group: String,
    pub positives: u64,
    pub negatives: u64,
    pub positive_share: Rate,
}

pub fn label_distribution(
    labels: &BTreeMap<String, u8>,
    cohort: &Cohort,
    attribute: Attribute,
) -> Result<Vec<GroupLabelCount>, MetricsError> {
    let mut by_group: BTreeMap<&str, (u64, u64)> = BTreeMap::new();
    for (id, &label) in labels {
        let record = cohort
            .record(id)
            .ok_or_else(|| MetricsError::MissingId(id.clone()))?;
        let entry = by_group.entry(record.demographic(attribute)).or_default();
        if label == 1 {
            entry.0 += 1;
        } else {
            entry.1 += 1;
        }
    }
    Ok(by_group
        .into_iter()
        .map(|(g, (positives, negatives))| GroupLabelCount {
            group: g.to_string(),
            positives,
            negatives,
            positive_share: Rate::ratio(positives, positives + negatives),
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FiveNumber {
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

impl FiveNumber {
    /// Quartiles by linear interpolation between order statistics at
    /// position `(n - 1) * p`; the median of an even count is the midpoint of
    /// the two middle values.
    pub fn of(values: &[f64]) -> Option<FiveNumber> {
        if values.is_empty() {
            return None;
        }
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let n = sorted.len();
        let median = if n % 2 == 1 {
            sorted[n / 2]
        } else {
            0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
        };
        let q = |p: f64| {
            let h = (n - 1) as f64 * p;
            let lo = h.floor() as usize;
            let hi = (lo + 1).min(n - 1);
            let (a, b) = (sorted[lo], sorted[hi]);
            (a + (h - lo as f64) * (b - a)).clamp(a, b)
        };
        Some(FiveNumber {
            min: sorted[0],
            q1: q(0.25).min(median),
            median,
            q3: q(0.75).max(median),
            max: sorted[n - 1],
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupScoreSummary {
    pub group: String,
    pub count: u64,
    /// `None` marks a group with no scored candidates.
    pub summary: Option<FiveNumber>,
}

/// Per-group order statistics of composite scores. Every group present in
/// the cohort appears; groups without scored members carry no summary.
pub fn score_distribution(
    scored: &[ScoredCandidate],
    cohort: &Cohort,
    attribute: Attribute,
) -> Result<Vec<GroupScoreSummary>, MetricsError> {
    let mut by_group: BTreeMap<&str, Vec<f64>> = cohort
        .records()
        .iter()
        .map(|r| (r.demographic(attribute), Vec::new()))
        .collect();
    for s in scored {
        let record = cohort
            .record(&s.candidate_id)
            .ok_or_else(|| MetricsError::MissingId(s.candidate_id.clone()))?;
        by_group
            .get_mut(record.demographic(attribute))
            .expect("group collected from cohort")
            .push(s.composite_score);
    }
    Ok(by_group
        .into_iter()
        .map(|(g, values)| GroupScoreSummary {
            group: g.to_string(),
            count: values.len() as u64,
            summary: FiveNumber::of(&values),
        })
        .collect())
}

/// Everything computed for one target-variable definition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelReport {
    pub accuracy: Rate,
    pub confusion: ConfusionMatrix,
    pub population_confusion: ConfusionMatrix,
    pub selected_count: u64,
    pub fairness: BTreeMap<Attribute, Vec<GroupMetrics>>,
    pub selection: BTreeMap<Attribute, Vec<GroupMetrics>>,
    pub label_distribution: BTreeMap<Attribute, Vec<GroupLabelCount>>,
    pub score_distribution: BTreeMap<Attribute, Vec<GroupScoreSummary>>,
    pub predictions: Vec<Prediction>,
}

/// Inputs for one side of a comparison.
#[derive(Debug, Clone, Copy)]
pub struct ModelRun<'a> {
    pub dataset: &'a LabeledDataset,
    pub model: &'a LinearModel,
    pub predictions: &'a [Prediction],
}

pub fn evaluate(cohort: &Cohort, run: &ModelRun<'_>) -> Result<ModelReport, MetricsError> {
    if !run.dataset.cohort_fingerprint.is_empty()
        && run.dataset.cohort_fingerprint != cohort.fingerprint()
    {
        return Err(MetricsError::CohortMismatch(
            "dataset was labeled on a different cohort".into(),
        ));
    }
    if run.predictions.len() != cohort.len() {
        return Err(MetricsError::CohortMismatch(format!(
            "{} predictions for {} candidates",
            run.predictions.len(),
            cohort.len()
        )));
    }
    let labels = &run.dataset.labels;
    let test_ids = &run.model.metadata.test_ids;
    let all_ids = cohort.ids();
    let confusion_test = confusion(run.predictions, labels, test_ids)?;
    let population_confusion = confusion(run.predictions, labels, &all_ids)?;
    let mut fairness = BTreeMap::new();
    let mut selection = BTreeMap::new();
    let mut label_dist = BTreeMap::new();
    let mut score_dist = BTreeMap::new();
    for attribute in Attribute::ALL {
        fairness.insert(
            attribute,
            group_metrics(run.predictions, labels, cohort, attribute, test_ids)?,
        );
        selection.insert(
            attribute,
            group_metrics(run.predictions, labels, cohort, attribute, &all_ids)?,
        );
        label_dist.insert(attribute, label_distribution(labels, cohort, attribute)?);
        score_dist.insert(
            attribute,
            score_distribution(&run.dataset.scored, cohort, attribute)?,
        );
    }
    Ok(ModelReport {
        accuracy: confusion_test.accuracy(),
        confusion: confusion_test,
        population_confusion,
        selected_count: population_confusion.selected(),
        fairness,
        selection,
        label_distribution: label_dist,
        score_distribution: score_dist,
        predictions: run.predictions.to_vec(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionDelta {
    pub tp: i64,
    pub fp: i64,
    #[serde(rename = "fn")]
    pub fn_: i64,
    pub tn: i64,
}

impl ConfusionDelta {
    fn between(a: &ConfusionMatrix, b: &ConfusionMatrix) -> Self {
        let d = |x: u64, y: u64| y as i64 - x as i64;
        ConfusionDelta {
            tp: d(a.tp, b.tp),
            fp: d(a.fp, b.fp),
            fn_: d(a.fn_, b.fn_),
            tn: d(a.tn, b.tn),
        }
    }
}

/// Per-group changes from model A to model B.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupDelta {
    pub group: String,
    pub selection_rate: Rate,
    pub tpr: Rate,
    pub fpr: Rate,
    pub ppv: Rate,
    pub npv: Rate,
    pub positive_label_share: Rate,
    pub median_score: Rate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankDelta {
    pub candidate_id: String,
    pub rank_a: usize,
    pub rank_b: usize,
    /// `rank_b - rank_a`.
    pub delta: i64,
    pub score_a: f64,
    pub score_b: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonDeltas {
    pub accuracy: Rate,
    pub confusion: ConfusionDelta,
    pub population_confusion: ConfusionDelta,
    pub selected_count: i64,
    pub groups: BTreeMap<Attribute, Vec<GroupDelta>>,
    /// Sorted by candidate id.
    pub rank_deltas: Vec<RankDelta>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportBases {
    pub fairness: String,
    pub selection: String,
    pub label_distribution: String,
    pub score_distribution: String,
}

impl Default for ReportBases {
    fn default() -> Self {
        Self {
            fairness: "held_out".into(),
            selection: "population".into(),
            label_distribution: "population".into(),
            score_distribution: "population".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub schema: String,
    pub bases: ReportBases,
    pub model_a: ModelReport,
    pub model_b: ModelReport,
    /// B minus A throughout.
    pub deltas: ComparisonDeltas,
}

fn find<'a, T>(items: &'a [T], group: &str, key: impl Fn(&T) -> &str) -> Option<&'a T> {
    items.iter().find(|x| key(x) == group)
}

fn group_deltas(a: &ModelReport, b: &ModelReport, attribute: Attribute) -> Vec<GroupDelta> {
    let groups: BTreeSet<&str> = [a, b]
        .iter()
        .flat_map(|r| {
            r.selection[&attribute]
                .iter()
                .map(|g| g.group.as_str())
                .chain(r.fairness[&attribute].iter().map(|g| g.group.as_str()))
        })
        .collect();
    let rate_delta = |ra: Option<Rate>, rb: Option<Rate>| match (ra, rb) {
        (Some(x), Some(y)) => x.delta_to(y),
        _ => Rate::UNDEFINED,
    };
    groups
        .into_iter()
        .map(|group| {
            let sel = |r: &ModelReport| {
                find(&r.selection[&attribute], group, |g| &g.group).map(|g| g.selection_rate)
            };
            let fair = |r: &ModelReport, f: fn(&GroupMetrics) -> Rate| {
                find(&r.fairness[&attribute], group, |g| &g.group).map(f)
            };
            let share = |r: &ModelReport| {
                find(&r.label_distribution[&attribute], group, |g| &g.group)
                    .map(|g| g.positive_share)
            };
            let median = |r: &ModelReport| {
                find(&r.score_distribution[&attribute], group, |g| &g.group).map(|g| {
                    g.summary
                        .map(|s| Rate::from(s.median))
                        .unwrap_or(Rate::UNDEFINED)
                })
            };
            GroupDelta {
                group: group.to_string(),
                selection_rate: rate_delta(sel(a), sel(b)),
                tpr: rate_delta(fair(a, |g| g.tpr), fair(b, |g| g.tpr)),
                fpr: rate_delta(fair(a, |g| g.fpr), fair(b, |g| g.fpr)),
                ppv: rate_delta(fair(a, |g| g.ppv), fair(b, |g| g.ppv)),
                npv: rate_delta(fair(a, |g| g.npv), fair(b, |g| g.npv)),
                positive_label_share: rate_delta(share(a), share(b)),
                median_score: rate_delta(median(a), median(b)),
            }
        })
        .collect()
}

/// Builds the A/B report. Both runs must be over `cohort`.
pub fn compare(
    cohort: &Cohort,
    a: &ModelRun<'_>,
    b: &ModelRun<'_>,
) -> Result<ComparisonReport, MetricsError> {
    if a.dataset.cohort_fingerprint != b.dataset.cohort_fingerprint {
        return Err(MetricsError::CohortMismatch(
            "models A and B were built on different cohorts".into(),
        ));
    }
    let model_a = evaluate(cohort, a)?;
    let model_b = evaluate(cohort, b)?;

    let by_id = |preds: &[Prediction]| -> HashMap<String, (usize, f64)> {
        preds
            .iter()
            .map(|p| (p.candidate_id.clone(), (p.rank, p.decision_score)))
            .collect()
    };
    let ranks_a = by_id(a.predictions);
    let ranks_b = by_id(b.predictions);
    let mut rank_deltas = Vec::with_capacity(cohort.len());
    for id in cohort.ids() {
        let (&(rank_a, score_a), &(rank_b, score_b)) = match (ranks_a.get(&id), ranks_b.get(&id)) {
            (Some(x), Some(y)) => (x, y),
            _ => return Err(MetricsError::MissingId(id)),
        };
        rank_deltas.push(RankDelta {
            candidate_id: id,
            rank_a,
            rank_b,
            delta: rank_b as i64 - rank_a as i64,
            score_a,
            score_b,
        });
    }

    let groups = Attribute::ALL
        .into_iter()
        .map(|attr| (attr, group_deltas(&model_a, &model_b, attr)))
        .collect();
    let deltas = ComparisonDeltas {
        accuracy: model_a.accuracy.delta_to(model_b.accuracy),
        confusion: ConfusionDelta::between(&model_a.confusion, &model_b.confusion),
        population_confusion: ConfusionDelta::between(
            &model_a.population_confusion,
            &model_b.population_confusion,
        ),
        selected_count: model_b.selected_count as i64 - model_a.selected_count as i64,
        groups,
        rank_deltas,
    };
    Ok(ComparisonReport {
        schema: REPORT_SCHEMA.to_string(),
        bases: ReportBases::default(),
        model_a,
        model_b,
        deltas,
    })
}
