//! Per-group fairness metrics for a single target definition.

use std::error::Error;

use fts_core::cohort::{generate_synthetic_cohort, SyntheticSpec};
use fts_core::metrics::{evaluate, ModelRun};
use fts_core::svm::{predict_all, train};
use fts_core::target::label_cohort;
use fts_core::{Attribute, LabelingPolicy, Rate, TrainConfig, Trait, WeightVector};

fn show(r: Rate) -> String {
    r.value()
        .map_or_else(|| "n/a".into(), |v| format!("{v:.3}"))
}

fn main() -> Result<(), Box<dyn Error>> {
    let spec = SyntheticSpec::default().with_shift(
        Attribute::Gender,
        "male",
        Trait::BehavioralRestraint,
        -0.4,
    );
    let cohort = generate_synthetic_cohort(&spec, 5)?;
    let dataset = label_cohort(
        &cohort,
        &WeightVector::only(Trait::BehavioralRestraint),
        &LabelingPolicy::default(),
        1,
    )?;
    let model = train(&dataset, &cohort, &TrainConfig::default())?;
    let predictions = predict_all(&model, &cohort)?;

    let report = evaluate(
        &cohort,
        &ModelRun {
            dataset: &dataset,
            model: &model,
            predictions: &predictions,
        },
    )?;
    println!("held-out accuracy {}", show(report.accuracy));
    println!(
        "{:<8} {:>8} {:>8} {:>8} {:>8}",
        "group", "sel", "tpr", "fpr", "ppv"
    );
    for attribute in [Attribute::Gender, Attribute::AgeGroup] {
        let selection = &report.selection[&attribute];
        for (fair, sel) in report.fairness[&attribute].iter().zip(selection) {
            println!(
                "{:<8} {:>8} {:>8} {:>8} {:>8}",
                fair.group,
                show(sel.selection_rate),
                show(fair.tpr),
                show(fair.fpr),
                show(fair.ppv)
            );
        }
    }
    Ok(())
}
