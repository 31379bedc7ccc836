//! Trains the linear SVM on a labeled cohort and scores every candidate.

use std::error::Error;

use fts_core::cohort::{generate_synthetic_cohort, SyntheticSpec};
use fts_core::svm::{predict_all, train, LinearModel};
use fts_core::target::label_cohort;
use fts_core::{LabelingPolicy, TrainConfig, Trait, WeightVector};

fn main() -> Result<(), Box<dyn Error>> {
    let cohort = generate_synthetic_cohort(&SyntheticSpec::default(), 3)?;
    let dataset = label_cohort(
        &cohort,
        &WeightVector::only(Trait::Attention),
        &LabelingPolicy::default(),
        9,
    )?;

    let config = TrainConfig {
        c: 2.0,
        ..TrainConfig::default()
    };
    let model = train(&dataset, &cohort, &config)?;
    if let Some(warning) = model.warning() {
        eprintln!("warning: {warning}");
    }
    for (t, w) in model.features.iter().zip(model.feature_weights) {
        println!("{:<30} {w:+.4}", t.name());
    }
    println!(
        "bias {:+.4}, objective {:.4} after {} solver passes",
        model.bias, model.metadata.objective, model.metadata.iterations
    );

    // the model document round-trips
    let restored = LinearModel::from_json(&model.to_json())?;
    assert_eq!(restored, model);

    let predictions = predict_all(&model, &cohort)?;
    let selected = predictions
        .iter()
        .filter(|p| p.predicted_label == 1)
        .count();
    println!(
        "{selected} of {} candidates predicted positive",
        predictions.len()
    );
    Ok(())
}
