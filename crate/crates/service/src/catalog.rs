//! Named cohorts a session can be created from.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use fts_core::cohort::{generate_synthetic_cohort, load_cohort, CohortError, Provenance, SyntheticSpec, TestDirectionConfig};
use fts_core::{Attribute, Cohort, Trait};
use serde::Serialize;

/// Seed used for every built-in synthetic cohort.
pub const BUILTIN_SEED: u64 = 7;

#[derive(Debug, Clone)]
pub struct CatalogEntry {
    pub name: String,
    pub description: String,
    pub cohort: Arc<Cohort>,
}

/// Listing row served by `GET /api/cohorts`.
#[derive(Debug, Clone, Serialize)]
pub struct CohortInfo<'a> {
    pub name: &'a str,
    pub description: &'a str,
    pub size: usize,
    pub fingerprint: &'a str,
    pub provenance: &'a Provenance,
}

#[derive(Debug, Clone, Default)]
pub struct Catalog {
    entries: BTreeMap<String, CatalogEntry>,
}

impl Catalog {
    pub fn empty() -> Self {
        Self::default()
    }

    /// The synthetic cohorts shipped with the service.
    pub fn builtin() -> Self {
        let mut catalog = Self::empty();
        let specs = [
            (
                "synthetic-default",
                "2000 synthetic candidates, no group shifts",
                SyntheticSpec::default(),
            ),
            (
                "synthetic-small",
                "200 synthetic candidates, no group shifts",
                SyntheticSpec::default().with_size(200),
            ),
            (
                "synthetic-reasoning-gap",
                "2000 synthetic candidates; country IN scores +0.5 sd on reasoning",
                SyntheticSpec::default().with_shift(Attribute::Country, "IN", Trait::Reasoning, 0.5),
            ),
        ];
        for (name, description, spec) in specs {
            let cohort = generate_synthetic_cohort(&spec, BUILTIN_SEED).expect("built-in spec is valid");
            catalog.insert(name, description, cohort);
        }
        catalog
    }

    pub fn insert(&mut self, name: &str, description: &str, cohort: Cohort) {
        self.entries.insert(
            name.to_string(),
            CatalogEntry {
                name: name.to_string(),
                description: description.to_string(),
                cohort: Arc::new(cohort),
            },
        );
    }

    /// Loads a cohort file and registers it under its file stem.
    pub fn load_file(&mut self, path: &Path, directions: &TestDirectionConfig) -> Result<String, CohortError> {
        let cohort = load_cohort(path, directions)?;
        let name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| path.display().to_string());
        self.insert(&name, &format!("loaded from {}", path.display()), cohort);
        Ok(name)
    }

    pub fn get(&self, name: &str) -> Option<&CatalogEntry> {
        self.entries.get(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn list(&self) -> Vec<CohortInfo<'_>> {
        self.entries
            .values()
            .map(|e| CohortInfo {
                name: &e.name,
                description: &e.description,
                size: e.cohort.len(),
                fingerprint: e.cohort.fingerprint(),
                provenance: e.cohort.provenance(),
            })
            .collect()
    }
}
