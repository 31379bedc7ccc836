use super::{
    CandidateRecord, CohortError, Orientation, Test, TestDirectionConfig, Trait, TraitProfile,
};

#[derive(Debug, Clone, PartialEq)]
pub struct Normalized {
    pub profiles: Vec<TraitProfile>,
    /// Tests with zero range across the cohort. Every candidate scores 0.5 on them.
    pub degenerate_tests: Vec<Test>,
}

/// Orients each test so that higher is better, min-max scales it across the
/// cohort to `[0, 1]`, and averages the scaled tests belonging to each trait.
///
/// A zero-range test maps to 0.5 for everyone instead of failing.
pub fn normalize_and_aggregate(
    records: &[CandidateRecord],
    directions: &TestDirectionConfig,
) -> Result<Normalized, CohortError> {
    if records.len() < 2 {
        return Err(CohortError::TooFewRecords(records.len()));
    }

    let mut scaled = vec![[0.0f64; Test::COUNT]; records.len()];
    let mut degenerate_tests = Vec::new();
    for test in Test::ALL {
        let oriented = |r: &CandidateRecord| match directions.get(test) {
            Orientation::Higher => r.raw(test),
            Orientation::Lower => -r.raw(test),
        };
        let (min, max) = records
            .iter()
            .map(oriented)
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
                (lo.min(v), hi.max(v))
            });
        let range = max - min;
        if range == 0.0 {
            degenerate_tests.push(test);
            for row in scaled.iter_mut() {
                row[test.index()] = 0.5;
            }
            continue;
        }
        for (row, record) in scaled.iter_mut().zip(records) {
            row[test.index()] = (oriented(record) - min) / range;
        }
    }

    let profiles = records
        .iter()
        .zip(&scaled)
        .map(|(record, row)| {
            let mut trait_scores = [0.0; Trait::COUNT];
            for t in Trait::ALL {
                let (sum, n) = t
                    .tests()
                    .fold((0.0, 0usize), |(s, n), test| (s + row[test.index()], n + 1));
                trait_scores[t.index()] = sum / n as f64;
            }
            TraitProfile {
                candidate_id: record.candidate_id.clone(),
                trait_scores,
            }
        })
        .collect();

    Ok(Normalized {
        profiles,
        degenerate_tests,
    })
}
