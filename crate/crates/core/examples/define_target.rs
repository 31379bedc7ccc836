//! Turns slider weights into a composite score, a top subset and labels.

use std::error::Error;

use fts_core::cohort::{generate_synthetic_cohort, SyntheticSpec};
use fts_core::metrics::score_distribution;
use fts_core::target::{composite_scores, label_cohort, sampling_weight};
use fts_core::{Attribute, LabelingPolicy, WeightVector};

fn main() -> Result<(), Box<dyn Error>> {
    let cohort = generate_synthetic_cohort(&SyntheticSpec::default(), 1)?;
    // memory, information processing speed, reasoning, attention, behavioral restraint
    let weights = WeightVector::new([2.0, 0.0, 5.0, 1.0, 0.0])?;
    let policy = LabelingPolicy::default();

    let scored = composite_scores(&cohort, &weights);
    for s in scored.iter().take(3) {
        println!(
            "rank {:>4}  {}  score {:.4}",
            s.rank, s.candidate_id, s.composite_score
        );
    }

    let n = policy.top_subset_size(cohort.len());
    println!(
        "top subset {n}: rank 1 weight {:.3}, rank {n} weight {:.3}",
        sampling_weight(1, n)?,
        sampling_weight(n, n)?
    );

    let dataset = label_cohort(&cohort, &weights, &policy, 42)?;
    println!(
        "{} positives, all drawn from the top {}",
        dataset.positive_count(),
        dataset.top_subset_ids.len()
    );

    for g in score_distribution(&scored, &cohort, Attribute::Country)? {
        if let Some(f) = g.summary {
            println!(
                "{:<6} median {:.3}  iqr [{:.3}, {:.3}]",
                g.group, f.median, f.q1, f.q3
            );
        }
    }
    Ok(())
}
