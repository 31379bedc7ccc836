//! Synthetic cohorts with controllable group disparities.
//!
//! Each candidate gets one latent ability per trait drawn from
//! `N(shift, 1)`, where `shift` is the sum of the configured per-group
//! shifts (in latent standard deviations) for the candidate's groups. Each
//! test then observes `latent + noise_scale * N(0, 1)` and maps it into
//! test-native units: span/count/accuracy tests as `mean + sd * s`, timed
//! tests as `median * exp(-log_sd * s)` (faster is better). Scores are
//! rounded to three decimals.

use std::collections::BTreeMap;

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{
    Attribute, CandidateRecord, Cohort, CohortError, Provenance, Test, TestDirectionConfig, Trait,
};
use crate::rng::{seeded, shuffle, SimRng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupShare {
    pub value: String,
    pub fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraitShift {
    pub attribute: Attribute,
    pub value: String,
    #[serde(rename = "trait")]
    pub trait_name: Trait,
    /// Mean shift of the latent trait, in latent standard deviations.
    pub shift: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSpec {
    pub size: usize,
    pub groups: BTreeMap<Attribute, Vec<GroupShare>>,
    #[serde(default)]
    pub shifts: Vec<TraitShift>,
    pub noise_scale: f64,
}

fn shares(items: &[(&str, f64)]) -> Vec<GroupShare> {
    items
        .iter()
        .map(|(value, fraction)| GroupShare {
            value: value.to_string(),
            fraction: *fraction,
        })
        .collect()
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        let mut groups = BTreeMap::new();
        groups.insert(Attribute::Gender, shares(&[("female", 0.5), ("male", 0.5)]));
        groups.insert(
            Attribute::AgeGroup,
            shares(&[
                ("18-29", 0.3),
                ("30-44", 0.35),
                ("45-59", 0.25),
                ("60+", 0.1),
            ]),
        );
        groups.insert(
            Attribute::EducationLevel,
            shares(&[("secondary", 0.35), ("bachelor", 0.45), ("graduate", 0.2)]),
        );
        groups.insert(
            Attribute::Country,
            shares(&[
                ("US", 0.4),
                ("UK", 0.2),
                ("CA", 0.15),
                ("IN", 0.15),
                ("other", 0.1),
            ]),
        );
        Self {
            size: 2000,
            groups,
            shifts: Vec::new(),
            noise_scale: 0.5,
        }
    }
}

impl SyntheticSpec {
    pub fn with_size(mut self, size: usize) -> Self {
        self.size = size;
        self
    }

    pub fn with_shift(
        mut self,
        attribute: Attribute,
        value: &str,
        trait_name: Trait,
        shift: f64,
    ) -> Self {
        self.shifts.push(TraitShift {
            attribute,
            value: value.to_string(),
            trait_name,
            shift,
        });
        self
    }

    pub fn with_groups(mut self, attribute: Attribute, groups: &[(&str, f64)]) -> Self {
        self.groups.insert(attribute, shares(groups));
        self
    }

    pub fn validate(&self) -> Result<(), CohortError> {
        let invalid = |m: String| Err(CohortError::InvalidSpec(m));
        if self.size < 10 {
            return invalid(format!("size must be at least 10, got {}", self.size));
        }
        if !(self.noise_scale.is_finite() && self.noise_scale > 0.0) {
            return invalid(format!(
                "noise_scale must be positive, got {}",
                self.noise_scale
            ));
        }
        for attribute in Attribute::ALL {
            let Some(groups) = self.groups.get(&attribute) else {
                return invalid(format!("no groups given for {attribute}"));
            };
            if groups.is_empty() {
                return invalid(format!("no groups given for {attribute}"));
            }
            let mut sum = 0.0;
            for (i, g) in groups.iter().enumerate() {
                if g.value.is_empty() || groups[..i].iter().any(|o| o.value == g.value) {
                    return invalid(format!(
                        "{attribute}: empty or repeated group {:?}",
                        g.value
                    ));
                }
                if !(g.fraction.is_finite() && g.fraction >= 0.0) {
                    return invalid(format!(
                        "{attribute}/{}: bad fraction {}",
                        g.value, g.fraction
                    ));
                }
                sum += g.fraction;
            }
            if (sum - 1.0).abs() > 1e-9 {
                return invalid(format!("{attribute}: fractions sum to {sum}, not 1"));
            }
        }
        for s in &self.shifts {
            if !s.shift.is_finite() {
                return invalid(format!("non-finite shift for {}/{}", s.attribute, s.value));
            }
            let known = self.groups[&s.attribute].iter().any(|g| g.value == s.value);
            if !known {
                return invalid(format!(
                    "shift refers to unknown group {}/{}",
                    s.attribute, s.value
                ));
            }
        }
        Ok(())
    }
}

/// Largest-remainder apportionment of `size` over `fractions`.
fn apportion(size: usize, fractions: &[f64]) -> Vec<usize> {
    let exact: Vec<f64> = fractions.iter().map(|f| f * size as f64).collect();
    let mut counts: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
    let assigned: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..fractions.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = exact[a] - exact[a].floor();
        let rb = exact[b] - exact[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for &i in order.iter().take(size.saturating_sub(assigned)) {
        counts[i] += 1;
    }
    counts
}

enum Scale {
    Linear { mean: f64, sd: f64 },
    Timed { median: f64, log_sd: f64 },
}

fn test_scale(test: Test) -> Scale {
    use Scale::*;
    match test {
        Test::ForwardMemorySpan => Linear { mean: 6.5, sd: 1.2 },
        Test::ReverseMemorySpan => Linear { mean: 5.0, sd: 1.2 },
        Test::VerbalListLearning => Linear {
            mean: 24.0,
            sd: 5.0,
        },
        Test::DelayedVerbalListLearning => Linear { mean: 8.0, sd: 2.5 },
        Test::DigitSymbolCoding => Linear {
            mean: 60.0,
            sd: 12.0,
        },
        Test::TrailMakingA => Timed {
            median: 32.0,
            log_sd: 0.3,
        },
        Test::TrailMakingB => Timed {
            median: 75.0,
            log_sd: 0.35,
        },
        Test::ArithmeticReasoning => Linear {
            mean: 15.0,
            sd: 4.0,
        },
        Test::GrammaticalReasoning => Linear {
            mean: 20.0,
            sd: 6.0,
        },
        Test::DividedVisualAttention => Linear {
            mean: 70.0,
            sd: 12.0,
        },
        Test::GoNoGo => Linear {
            mean: 0.85,
            sd: 0.08,
        },
    }
}

fn round3(v: f64) -> f64 {
    (v * 1000.0).round() / 1000.0
}

fn normal(rng: &mut SimRng) -> f64 {
    StandardNormal.sample(rng)
}

/// Deterministic for a fixed `(spec, seed)`.
pub fn generate_synthetic_cohort(spec: &SyntheticSpec, seed: u64) -> Result<Cohort, CohortError> {
    spec.validate()?;
    let mut rng = seeded(seed);
    let size = spec.size;

    let mut assignments: BTreeMap<Attribute, Vec<String>> = BTreeMap::new();
    for attribute in Attribute::ALL {
        let groups = &spec.groups[&attribute];
        let fractions: Vec<f64> = groups.iter().map(|g| g.fraction).collect();
        let counts = apportion(size, &fractions);
        let mut labels: Vec<String> = groups
            .iter()
            .zip(&counts)
            .flat_map(|(g, &n)| std::iter::repeat_n(g.value.clone(), n))
            .collect();
        shuffle(&mut rng, &mut labels);
        assignments.insert(attribute, labels);
    }

    let width = size.to_string().len().max(5);
    let mut records = Vec::with_capacity(size);
    #[allow(clippy::needless_range_loop)]
    for i in 0..size {
        let group_of = |a: Attribute| assignments[&a][i].as_str();
        let mut latent = [0.0; Trait::COUNT];
        for t in Trait::ALL {
            let shift: f64 = spec
                .shifts
                .iter()
                .filter(|s| s.trait_name == t && group_of(s.attribute) == s.value)
                .map(|s| s.shift)
                .sum();
            latent[t.index()] = shift + normal(&mut rng);
        }
        let mut raw_tests = [0.0; Test::COUNT];
        for test in Test::ALL {
            let s = latent[test.trait_group().index()] + spec.noise_scale * normal(&mut rng);
            raw_tests[test.index()] = round3(match test_scale(test) {
                Scale::Linear { mean, sd } => mean + sd * s,
                Scale::Timed { median, log_sd } => median * (-log_sd * s).exp(),
            });
        }
        records.push(CandidateRecord {
            candidate_id: format!("c{:0width$}", i + 1),
            gender: group_of(Attribute::Gender).to_string(),
            age_group: group_of(Attribute::AgeGroup).to_string(),
            education_level: group_of(Attribute::EducationLevel).to_string(),
            country: group_of(Attribute::Country).to_string(),
            raw_tests,
        });
    }

    Cohort::from_records(
        records,
        &TestDirectionConfig::default(),
        Provenance::Synthetic {
            spec: spec.clone(),
            seed,
        },
    )
}
