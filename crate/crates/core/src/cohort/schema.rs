use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::CohortError;
use crate::kv::parse_kv;

/// The eleven tests of the psychometric battery, in file-column order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Test {
    ForwardMemorySpan,
    ReverseMemorySpan,
    VerbalListLearning,
    DelayedVerbalListLearning,
    DigitSymbolCoding,
    TrailMakingA,
    TrailMakingB,
    ArithmeticReasoning,
    GrammaticalReasoning,
    DividedVisualAttention,
    GoNoGo,
}

impl Test {
    pub const COUNT: usize = 11;

    pub const ALL: [Test; Test::COUNT] = [
        Test::ForwardMemorySpan,
        Test::ReverseMemorySpan,
        Test::VerbalListLearning,
        Test::DelayedVerbalListLearning,
        Test::DigitSymbolCoding,
        Test::TrailMakingA,
        Test::TrailMakingB,
        Test::ArithmeticReasoning,
        Test::GrammaticalReasoning,
        Test::DividedVisualAttention,
        Test::GoNoGo,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Test::ForwardMemorySpan => "forward_memory_span",
            Test::ReverseMemorySpan => "reverse_memory_span",
            Test::VerbalListLearning => "verbal_list_learning",
            Test::DelayedVerbalListLearning => "delayed_verbal_list_learning",
            Test::DigitSymbolCoding => "digit_symbol_coding",
            Test::TrailMakingA => "trail_making_a",
            Test::TrailMakingB => "trail_making_b",
            Test::ArithmeticReasoning => "arithmetic_reasoning",
            Test::GrammaticalReasoning => "grammatical_reasoning",
            Test::DividedVisualAttention => "divided_visual_attention",
            Test::GoNoGo => "go_no_go",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn trait_group(self) -> Trait {
        match self {
            Test::ForwardMemorySpan
            | Test::ReverseMemorySpan
            | Test::VerbalListLearning
            | Test::DelayedVerbalListLearning => Trait::Memory,
            Test::DigitSymbolCoding | Test::TrailMakingA | Test::TrailMakingB => {
                Trait::InformationProcessingSpeed
            }
            Test::ArithmeticReasoning | Test::GrammaticalReasoning => Trait::Reasoning,
            Test::DividedVisualAttention => Trait::Attention,
            Test::GoNoGo => Trait::BehavioralRestraint,
        }
    }
}

impl fmt::Display for Test {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Test {
    type Err = CohortError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Test::ALL
            .into_iter()
            .find(|t| t.name() == s)
            .ok_or_else(|| CohortError::UnknownTest(s.to_string()))
    }
}

/// The five cognitive traits, in canonical feature order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Trait {
    Memory,
    InformationProcessingSpeed,
    Reasoning,
    Attention,
    BehavioralRestraint,
}

impl Trait {
    pub const COUNT: usize = 5;

    pub const ALL: [Trait; Trait::COUNT] = [
        Trait::Memory,
        Trait::InformationProcessingSpeed,
        Trait::Reasoning,
        Trait::Attention,
        Trait::BehavioralRestraint,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Trait::Memory => "memory",
            Trait::InformationProcessingSpeed => "information_processing_speed",
            Trait::Reasoning => "reasoning",
            Trait::Attention => "attention",
            Trait::BehavioralRestraint => "behavioral_restraint",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn tests(self) -> impl Iterator<Item = Test> {
        Test::ALL
            .into_iter()
            .filter(move |t| t.trait_group() == self)
    }
}

impl fmt::Display for Trait {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Trait {
    type Err = CohortError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Trait::ALL
            .into_iter()
            .find(|t| t.name() == s)
            .ok_or_else(|| CohortError::UnknownTrait(s.to_string()))
    }
}

/// Demographic attributes carried by each candidate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Attribute {
    Gender,
    AgeGroup,
    EducationLevel,
    Country,
}

impl Attribute {
    pub const ALL: [Attribute; 4] = [
        Attribute::Gender,
        Attribute::AgeGroup,
        Attribute::EducationLevel,
        Attribute::Country,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Attribute::Gender => "gender",
            Attribute::AgeGroup => "age_group",
            Attribute::EducationLevel => "education_level",
            Attribute::Country => "country",
        }
    }
}

impl fmt::Display for Attribute {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown demographic attribute {0:?}")]
pub struct UnknownAttribute(pub String);

impl FromStr for Attribute {
    type Err = UnknownAttribute;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Attribute::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| UnknownAttribute(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Orientation {
    Higher,
    Lower,
}

/// Whether a higher raw score is better, per test.
///
/// The default marks the two timed trail-making tests lower-is-better and
/// everything else higher-is-better.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TestDirectionConfig {
    orientation: [Orientation; Test::COUNT],
}

impl Default for TestDirectionConfig {
    fn default() -> Self {
        let mut orientation = [Orientation::Higher; Test::COUNT];
        orientation[Test::TrailMakingA.index()] = Orientation::Lower;
        orientation[Test::TrailMakingB.index()] = Orientation::Lower;
        Self { orientation }
    }
}

impl TestDirectionConfig {
    pub fn all_higher() -> Self {
        Self {
            orientation: [Orientation::Higher; Test::COUNT],
        }
    }

    pub fn get(&self, test: Test) -> Orientation {
        self.orientation[test.index()]
    }

    pub fn with(mut self, test: Test, orientation: Orientation) -> Self {
        self.orientation[test.index()] = orientation;
        self
    }

    /// Parses `test_name=higher|lower` lines; all eleven tests must appear.
    pub fn parse(text: &str) -> Result<Self, CohortError> {
        let kv = parse_kv(text).map_err(|e| CohortError::DirectionConfig(e.to_string()))?;
        let mut seen: BTreeMap<Test, Orientation> = BTreeMap::new();
        for (key, value) in &kv {
            let test: Test = key.parse()?;
            let orientation = match value.as_str() {
                "higher" => Orientation::Higher,
                "lower" => Orientation::Lower,
                other => {
                    return Err(CohortError::DirectionConfig(format!(
                        "{key}: expected higher or lower, got {other:?}"
                    )))
                }
            };
            seen.insert(test, orientation);
        }
        let mut orientation = [Orientation::Higher; Test::COUNT];
        for test in Test::ALL {
            match seen.get(&test) {
                Some(o) => orientation[test.index()] = *o,
                None => {
                    return Err(CohortError::DirectionConfig(format!(
                        "missing entry for {test}"
                    )))
                }
            }
        }
        Ok(Self { orientation })
    }

    pub fn load(path: &Path) -> Result<Self, CohortError> {
        let text = std::fs::read_to_string(path).map_err(|e| CohortError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::parse(&text)
    }

    pub fn to_kv_string(&self) -> String {
        let mut out = String::new();
        for test in Test::ALL {
            let o = match self.get(test) {
                Orientation::Higher => "higher",
                Orientation::Lower => "lower",
            };
            out.push_str(&format!("{}={}\n", test.name(), o));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trait_grouping_matches_battery_layout() {
        let sizes: Vec<usize> = Trait::ALL.iter().map(|t| t.tests().count()).collect();
        assert_eq!(sizes, vec![4, 3, 2, 1, 1]);
    }

    #[test]
    fn default_directions_flip_only_trail_making() {
        let d = TestDirectionConfig::default();
        for test in Test::ALL {
            let expected = if matches!(test, Test::TrailMakingA | Test::TrailMakingB) {
                Orientation::Lower
            } else {
                Orientation::Higher
            };
            assert_eq!(d.get(test), expected, "{test}");
        }
    }

    #[test]
    fn direction_config_round_trips_through_text() {
        let d = TestDirectionConfig::default().with(Test::GoNoGo, Orientation::Lower);
        assert_eq!(TestDirectionConfig::parse(&d.to_kv_string()).unwrap(), d);
    }

    #[test]
    fn direction_config_requires_all_tests() {
        let text = "forward_memory_span=higher\n";
        assert!(matches!(
            TestDirectionConfig::parse(text),
            Err(CohortError::DirectionConfig(_))
        ));
        let bad = TestDirectionConfig::default()
            .to_kv_string()
            .replace("go_no_go=higher", "go_no_go=sideways");
        assert!(TestDirectionConfig::parse(&bad).is_err());
        let unknown = format!(
            "{}stroop=higher\n",
            TestDirectionConfig::default().to_kv_string()
        );
        assert!(matches!(
            TestDirectionConfig::parse(&unknown),
            Err(CohortError::UnknownTest(_))
        ));
    }
}
