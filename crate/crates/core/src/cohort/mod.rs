//! Psychometric cohort data.
//!
//! A cohort file is UTF-8 comma-separated text with the header
//!
//! ```text
//! candidate_id,gender,age_group,education_level,country,forward_memory_span,
//! reverse_memory_span,verbal_list_learning,delayed_verbal_list_learning,
//! digit_symbol_coding,trail_making_a,trail_making_b,arithmetic_reasoning,
//! grammatical_reasoning,divided_visual_attention,go_no_go
//! ```
//!
//! (one line in the file). Every score must be present and finite. On load
//! the records are sorted by `candidate_id` and each candidate's eleven raw
//! scores are oriented, min-max scaled across the cohort and averaged into
//! five trait scores (see [`normalize_and_aggregate`]).

mod normalize;
mod schema;
mod synthetic;

use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

pub use normalize::{normalize_and_aggregate, Normalized};
pub use schema::{Attribute, Orientation, Test, TestDirectionConfig, Trait, UnknownAttribute};
pub use synthetic::{generate_synthetic_cohort, GroupShare, SyntheticSpec, TraitShift};

pub const DEMOGRAPHIC_COLUMNS: [&str; 5] = [
    "candidate_id",
    "gender",
    "age_group",
    "education_level",
    "country",
];

/// Column names in file order.
pub fn header() -> Vec<&'static str> {
    DEMOGRAPHIC_COLUMNS
        .iter()
        .copied()
        .chain(Test::ALL.iter().map(|t| t.name()))
        .collect()
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CohortError {
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("missing column {0}")]
    MissingColumn(String),
    #[error("unexpected column {0}")]
    UnexpectedColumn(String),
    #[error("line {line}: malformed value {value:?} in column {column}")]
    Malformed {
        line: u64,
        column: String,
        value: String,
    },
    #[error("line {line}: {message}")]
    Csv { line: u64, message: String },
    #[error("candidate {candidate_id}: non-finite score for {test}")]
    NonFiniteScore { candidate_id: String, test: Test },
    #[error("duplicate candidate id {0}")]
    DuplicateCandidateId(String),
    #[error("cohort has no candidates")]
    EmptyCohort,
    #[error("normalization needs at least 2 candidates, got {0}")]
    TooFewRecords(usize),
    #[error("unknown test {0:?}")]
    UnknownTest(String),
    #[error("unknown trait {0:?}")]
    UnknownTrait(String),
    #[error("direction config: {0}")]
    DirectionConfig(String),
    #[error("invalid synthetic spec: {0}")]
    InvalidSpec(String),
}

/// One candidate: demographics plus the eleven raw test scores in
/// test-native units, indexed by [`Test::index`].
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateRecord {
    pub candidate_id: String,
    pub gender: String,
    pub age_group: String,
    pub education_level: String,
    pub country: String,
    pub raw_tests: [f64; Test::COUNT],
}

impl CandidateRecord {
    pub fn raw(&self, test: Test) -> f64 {
        self.raw_tests[test.index()]
    }

    pub fn demographic(&self, attribute: Attribute) -> &str {
        match attribute {
            Attribute::Gender => &self.gender,
            Attribute::AgeGroup => &self.age_group,
            Attribute::EducationLevel => &self.education_level,
            Attribute::Country => &self.country,
        }
    }
}

/// Five trait scores in `[0, 1]`, indexed by [`Trait::index`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraitProfile {
    pub candidate_id: String,
    pub trait_scores: [f64; Trait::COUNT],
}

impl TraitProfile {
    pub fn score(&self, t: Trait) -> f64 {
        self.trait_scores[t.index()]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Provenance {
    File { path: String },
    Synthetic { spec: SyntheticSpec, seed: u64 },
    Inline { label: String },
}

#[derive(Debug, Clone)]
pub struct Cohort {
    records: Vec<CandidateRecord>,
    profiles: Vec<TraitProfile>,
    provenance: Provenance,
    directions: TestDirectionConfig,
    degenerate_tests: Vec<Test>,
    fingerprint: String,
}

impl Cohort {
    /// Validates, sorts by id and normalizes a set of records.
    pub fn from_records(
        mut records: Vec<CandidateRecord>,
        directions: &TestDirectionConfig,
        provenance: Provenance,
    ) -> Result<Self, CohortError> {
        if records.is_empty() {
            return Err(CohortError::EmptyCohort);
        }
        for record in &records {
            for test in Test::ALL {
                if !record.raw(test).is_finite() {
                    return Err(CohortError::NonFiniteScore {
                        candidate_id: record.candidate_id.clone(),
                        test,
                    });
                }
            }
        }
        let mut seen = HashSet::with_capacity(records.len());
        for record in &records {
            if !seen.insert(record.candidate_id.as_str()) {
                return Err(CohortError::DuplicateCandidateId(
                    record.candidate_id.clone(),
                ));
            }
        }
        records.sort_by(|a, b| a.candidate_id.cmp(&b.candidate_id));
        let Normalized {
            profiles,
            degenerate_tests,
        } = normalize_and_aggregate(&records, directions)?;
        let mut cohort = Cohort {
            records,
            profiles,
            provenance,
            directions: directions.clone(),
            degenerate_tests,
            fingerprint: String::new(),
        };
        let mut fp_input = cohort.to_csv().into_bytes();
        fp_input.extend_from_slice(directions.to_kv_string().as_bytes());
        cohort.fingerprint = crate::rng::sha256_hex(&fp_input);
        Ok(cohort)
    }

    pub fn records(&self) -> &[CandidateRecord] {
        &self.records
    }

    pub fn profiles(&self) -> &[TraitProfile] {
        &self.profiles
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn directions(&self) -> &TestDirectionConfig {
        &self.directions
    }

    /// Tests whose raw scores had zero range; every candidate got 0.5 for them.
    pub fn degenerate_tests(&self) -> &[Test] {
        &self.degenerate_tests
    }

    /// SHA-256 over the serialized records and the direction config.
    pub fn fingerprint(&self) -> &str {
        &self.fingerprint
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn index_of(&self, candidate_id: &str) -> Option<usize> {
        self.records
            .binary_search_by(|r| r.candidate_id.as_str().cmp(candidate_id))
            .ok()
    }

    pub fn record(&self, candidate_id: &str) -> Option<&CandidateRecord> {
        self.index_of(candidate_id).map(|i| &self.records[i])
    }

    pub fn profile(&self, candidate_id: &str) -> Option<&TraitProfile> {
        self.index_of(candidate_id).map(|i| &self.profiles[i])
    }

    pub fn ids(&self) -> Vec<String> {
        self.records
            .iter()
            .map(|r| r.candidate_id.clone())
            .collect()
    }

    /// Serializes the raw records in the cohort file format.
    pub fn to_csv(&self) -> String {
        write_csv(&self.records)
    }

    pub fn write_csv(&self, path: &Path) -> Result<(), CohortError> {
        std::fs::write(path, self.to_csv()).map_err(|e| CohortError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })
    }
}

pub fn write_csv(records: &[CandidateRecord]) -> String {
    let mut writer = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    writer
        .write_record(header())
        .expect("writing to memory cannot fail");
    for r in records {
        let mut row: Vec<String> = vec![
            r.candidate_id.clone(),
            r.gender.clone(),
            r.age_group.clone(),
            r.education_level.clone(),
            r.country.clone(),
        ];
        row.extend(r.raw_tests.iter().map(|v| v.to_string()));
        writer
            .write_record(&row)
            .expect("writing to memory cannot fail");
    }
    let bytes = writer.into_inner().expect("in-memory writer");
    String::from_utf8(bytes).expect("csv output is utf-8")
}

/// Parses cohort file contents.
pub fn parse_cohort(
    text: &str,
    directions: &TestDirectionConfig,
    provenance: Provenance,
) -> Result<Cohort, CohortError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(text.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| CohortError::Csv {
            line: 1,
            message: e.to_string(),
        })?
        .clone();

    let expected = header();
    let mut column_of = Vec::with_capacity(expected.len());
    for name in &expected {
        match headers.iter().position(|h| h == *name) {
            Some(i) => column_of.push(i),
            None => return Err(CohortError::MissingColumn(name.to_string())),
        }
    }
    if let Some(extra) = headers.iter().find(|h| !expected.contains(h)) {
        return Err(CohortError::UnexpectedColumn(extra.to_string()));
    }
    if headers.len() != expected.len() {
        return Err(CohortError::Csv {
            line: 1,
            message: "header repeats a column".into(),
        });
    }

    let mut records = Vec::new();
    for row in reader.records() {
        let row = row.map_err(|e| CohortError::Csv {
            line: e.position().map(|p| p.line()).unwrap_or(0),
            message: e.to_string(),
        })?;
        let line = row.position().map(|p| p.line()).unwrap_or(0);
        let field = |i: usize| -> Result<String, CohortError> {
            let value = row.get(column_of[i]).unwrap_or("");
            if value.is_empty() {
                return Err(CohortError::Malformed {
                    line,
                    column: expected[i].to_string(),
                    value: value.to_string(),
                });
            }
            Ok(value.to_string())
        };
        let candidate_id = field(0)?;
        let mut raw_tests = [0.0; Test::COUNT];
        for test in Test::ALL {
            let col = DEMOGRAPHIC_COLUMNS.len() + test.index();
            let text = field(col)?;
            let value: f64 = text.trim().parse().map_err(|_| CohortError::Malformed {
                line,
                column: test.name().to_string(),
                value: text.clone(),
            })?;
            if !value.is_finite() {
                return Err(CohortError::NonFiniteScore {
                    candidate_id: candidate_id.clone(),
                    test,
                });
            }
            raw_tests[test.index()] = value;
        }
        records.push(CandidateRecord {
            candidate_id,
            gender: field(1)?,
            age_group: field(2)?,
            education_level: field(3)?,
            country: field(4)?,
            raw_tests,
        });
    }
    Cohort::from_records(records, directions, provenance)
}

pub fn load_cohort(path: &Path, directions: &TestDirectionConfig) -> Result<Cohort, CohortError> {
    let text = std::fs::read_to_string(path).map_err(|e| CohortError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    parse_cohort(
        &text,
        directions,
        Provenance::File {
            path: path.display().to_string(),
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(id: &str, scores: [f64; 11]) -> String {
        let mut s = format!("{id},female,30-44,bachelor,US");
        for v in scores {
            s.push_str(&format!(",{v}"));
        }
        s
    }

    fn three_rows() -> String {
        let mut text = header().join(",");
        text.push('\n');
        text.push_str(&row("c3", [5.0; 11]));
        text.push('\n');
        text.push_str(&row("c1", [1.0; 11]));
        text.push('\n');
        text.push_str(&row("c2", [3.0; 11]));
        text.push('\n');
        text
    }

    fn inline() -> Provenance {
        Provenance::Inline {
            label: "test".into(),
        }
    }

    #[test]
    fn well_formed_file_loads_sorted() {
        let c = parse_cohort(&three_rows(), &TestDirectionConfig::default(), inline()).unwrap();
        assert_eq!(c.len(), 3);
        assert_eq!(c.profiles().len(), 3);
        assert_eq!(c.ids(), vec!["c1", "c2", "c3"]);
        for (r, p) in c.records().iter().zip(c.profiles()) {
            assert_eq!(r.candidate_id, p.candidate_id);
        }
        // c1 has the lowest raw scores everywhere, so after orientation it
        // tops the timed tests and bottoms everything else.
        let p1 = c.profile("c1").unwrap();
        assert_eq!(p1.score(Trait::Memory), 0.0);
        assert!((p1.score(Trait::InformationProcessingSpeed) - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn missing_column_is_reported_by_name() {
        let text = three_rows().replace(",trail_making_a", "");
        let err = parse_cohort(&text, &TestDirectionConfig::default(), inline()).unwrap_err();
        assert_eq!(err, CohortError::MissingColumn("trail_making_a".into()));
    }

    #[test]
    fn duplicate_id_is_rejected() {
        let mut text = three_rows();
        text.push_str(&row("c7", [2.0; 11]));
        text.push('\n');
        text.push_str(&row("c7", [2.5; 11]));
        text.push('\n');
        let err = parse_cohort(&text, &TestDirectionConfig::default(), inline()).unwrap_err();
        assert_eq!(err, CohortError::DuplicateCandidateId("c7".into()));
    }

    #[test]
    fn non_finite_and_malformed_scores_abort() {
        let mut text = three_rows();
        let mut scores = [2.0; 11];
        scores[3] = f64::NAN;
        text.push_str(&row("c9", scores));
        text.push('\n');
        let err = parse_cohort(&text, &TestDirectionConfig::default(), inline()).unwrap_err();
        assert_eq!(
            err,
            CohortError::NonFiniteScore {
                candidate_id: "c9".into(),
                test: Test::DelayedVerbalListLearning
            }
        );

        let bad = three_rows().replacen(",5,", ",five,", 1);
        let err = parse_cohort(&bad, &TestDirectionConfig::default(), inline()).unwrap_err();
        assert!(
            matches!(err, CohortError::Malformed { line: 2, .. }),
            "{err:?}"
        );
    }

    #[test]
    fn empty_cohort_and_extra_columns() {
        let text = format!("{}\n", header().join(","));
        assert_eq!(
            parse_cohort(&text, &TestDirectionConfig::default(), inline()).unwrap_err(),
            CohortError::EmptyCohort
        );
        let extra = three_rows().replacen("go_no_go", "go_no_go,stroop", 1);
        assert!(matches!(
            parse_cohort(&extra, &TestDirectionConfig::default(), inline()),
            Err(CohortError::UnexpectedColumn(c)) if c == "stroop"
        ));
    }

    #[test]
    fn serialize_then_load_is_a_fixed_point() {
        let c = parse_cohort(&three_rows(), &TestDirectionConfig::default(), inline()).unwrap();
        let again = parse_cohort(&c.to_csv(), &TestDirectionConfig::default(), inline()).unwrap();
        assert_eq!(again.to_csv(), c.to_csv());
        assert_eq!(again.profiles(), c.profiles());
        assert_eq!(again.fingerprint(), c.fingerprint());
    }

    #[test]
    fn load_cohort_reports_missing_file() {
        let err = load_cohort(
            Path::new("/nonexistent/cohort.csv"),
            &TestDirectionConfig::default(),
        )
        .unwrap_err();
        assert!(matches!(err, CohortError::Io { .. }));
    }
}
