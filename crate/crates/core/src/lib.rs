//! Simulates how the definition of a "good employee" target variable changes
//! who a trained hiring model selects, and how group fairness metrics move.
//!
//! The pipeline, per target-variable definition:
//!
//! 1. [`cohort`]: eleven psychometric test scores per candidate, oriented,
//!    min-max scaled and averaged into five trait scores;
//! 2. [`target`]: a five-slider [`WeightVector`](target::WeightVector) turns
//!    trait scores into a composite score; the top 15% form a pool from which
//!    100 positives are drawn with linearly decaying rank weights;
//! 3. [`svm`]: a class-balanced soft-margin linear SVM is trained on the
//!    labels;
//! 4. [`metrics`]: confusion matrices, per-group selection rates and
//!    TPR/FPR/PPV/NPV, label and score distributions;
//! 5. [`engine`]: runs two definitions (A and B) side by side and diffs them.

pub mod cohort;
pub mod engine;
pub mod kv;
pub mod metrics;
pub mod rng;
pub mod svm;
pub mod target;

pub use cohort::{
    generate_synthetic_cohort, load_cohort, Attribute, Cohort, SyntheticSpec, Test,
    TestDirectionConfig, Trait,
};
pub use engine::{
    run_simulation, run_simulation_with, RunOptions, SessionConfig, SimulationResult,
};
pub use metrics::{ComparisonReport, Rate};
pub use svm::TrainConfig;
pub use target::{LabelingPolicy, WeightVector};
