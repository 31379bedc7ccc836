//! Generates a synthetic cohort with a reasoning advantage for one country,
//! writes it as CSV and loads it back.
//!
//! Usage: cargo run -p fts-core --example generate_cohort [out.csv]

use std::error::Error;

use fts_core::cohort::{generate_synthetic_cohort, load_cohort, SyntheticSpec};
use fts_core::{Attribute, TestDirectionConfig, Trait};

fn main() -> Result<(), Box<dyn Error>> {
    let out = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "cohort.csv".into());
    let spec = SyntheticSpec::default().with_size(1000).with_shift(
        Attribute::Country,
        "IN",
        Trait::Reasoning,
        0.5,
    );
    let cohort = generate_synthetic_cohort(&spec, 7)?;
    cohort.write_csv(out.as_ref())?;

    let loaded = load_cohort(out.as_ref(), &TestDirectionConfig::default())?;
    println!("wrote {} candidates to {out}", loaded.len());
    println!("fingerprint {}", loaded.fingerprint());

    let (mut inside, mut outside) = (Vec::new(), Vec::new());
    for (record, profile) in loaded.records().iter().zip(loaded.profiles()) {
        let bucket = if record.country == "IN" {
            &mut inside
        } else {
            &mut outside
        };
        bucket.push(profile.score(Trait::Reasoning));
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    println!(
        "mean reasoning score: IN {:.3}, everyone else {:.3}",
        mean(&inside),
        mean(&outside)
    );
    Ok(())
}
