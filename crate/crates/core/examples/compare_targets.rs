//! Runs the full A/B simulation and prints how selection rates move between
//! two target definitions. Writes the report document when given a path.

use std::error::Error;

use fts_core::cohort::{generate_synthetic_cohort, SyntheticSpec};
use fts_core::{run_simulation, Attribute, Rate, SessionConfig, Trait, WeightVector};

fn show(r: Rate) -> String {
    r.value()
        .map_or_else(|| "n/a".into(), |v| format!("{v:.3}"))
}

fn main() -> Result<(), Box<dyn Error>> {
    let spec = SyntheticSpec::default().with_shift(Attribute::Country, "IN", Trait::Reasoning, 0.5);
    let cohort = generate_synthetic_cohort(&spec, 11)?;
    let config = SessionConfig::new(
        WeightVector::only(Trait::Reasoning),
        WeightVector::only(Trait::Attention),
        42,
    );
    let result = run_simulation(&cohort, &config)?;
    for w in &result.warnings {
        eprintln!("warning: {w}");
    }

    let report = &result.report;
    println!(
        "accuracy A {}  B {}  delta {}",
        show(report.model_a.accuracy),
        show(report.model_b.accuracy),
        show(report.deltas.accuracy)
    );
    let a = &report.model_a.selection[&Attribute::Country];
    let b = &report.model_b.selection[&Attribute::Country];
    for ((ga, gb), d) in a
        .iter()
        .zip(b)
        .zip(&report.deltas.groups[&Attribute::Country])
    {
        println!(
            "{:<6} selected A {}  B {}  delta {}",
            ga.group,
            show(ga.selection_rate),
            show(gb.selection_rate),
            show(d.selection_rate)
        );
    }
    let moved = report
        .deltas
        .rank_deltas
        .iter()
        .filter(|d| d.delta.abs() >= 500)
        .count();
    println!("{moved} candidates moved 500 or more places");

    if let Some(path) = std::env::args().nth(1) {
        std::fs::write(&path, result.to_json())?;
        println!("report written to {path}");
    }
    Ok(())
}
