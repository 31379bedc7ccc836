use fts_core::cohort::{
    generate_synthetic_cohort, load_cohort, CohortError, Orientation, SyntheticSpec, Test,
    TestDirectionConfig, Trait,
};
use fts_core::Attribute;

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    sum / n as f64
}

#[test]
fn reasoning_shift_lifts_the_shifted_group_on_every_seed() {
    let spec = SyntheticSpec::default().with_size(1000).with_shift(
        Attribute::Country,
        "IN",
        Trait::Reasoning,
        0.5,
    );
    for seed in 0..10 {
        let cohort = generate_synthetic_cohort(&spec, seed).unwrap();
        let (shifted, rest): (Vec<_>, Vec<_>) = cohort
            .records()
            .iter()
            .zip(cohort.profiles())
            .partition(|(r, _)| r.country == "IN");
        let m_shifted = mean(shifted.iter().map(|(_, p)| p.score(Trait::Reasoning)));
        let m_rest = mean(rest.iter().map(|(_, p)| p.score(Trait::Reasoning)));
        assert!(m_shifted > m_rest, "seed {seed}: {m_shifted} <= {m_rest}");
    }
}

#[test]
fn even_gender_split_stays_within_two_of_half() {
    for seed in [0, 1, 2, 3] {
        let cohort =
            generate_synthetic_cohort(&SyntheticSpec::default().with_size(1000), seed).unwrap();
        let female = cohort
            .records()
            .iter()
            .filter(|r| r.gender == "female")
            .count();
        assert!((498..=502).contains(&female), "seed {seed}: {female}");
        assert_eq!(
            female
                + cohort
                    .records()
                    .iter()
                    .filter(|r| r.gender == "male")
                    .count(),
            1000
        );
    }
}

#[test]
fn written_cohort_loads_back_identically() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cohort.csv");
    let cohort = generate_synthetic_cohort(&SyntheticSpec::default().with_size(50), 4).unwrap();
    cohort.write_csv(&path).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    assert_eq!(text.lines().count(), 51);

    let loaded = load_cohort(&path, &TestDirectionConfig::default()).unwrap();
    assert_eq!(loaded.records(), cohort.records());
    assert_eq!(loaded.profiles(), cohort.profiles());
    assert_eq!(loaded.fingerprint(), cohort.fingerprint());

    let again = dir.path().join("again.csv");
    loaded.write_csv(&again).unwrap();
    assert_eq!(std::fs::read(&again).unwrap(), text.into_bytes());
}

#[test]
fn direction_file_changes_orientation() {
    let dir = tempfile::tempdir().unwrap();
    let cohort = generate_synthetic_cohort(&SyntheticSpec::default().with_size(30), 8).unwrap();
    let csv = dir.path().join("c.csv");
    cohort.write_csv(&csv).unwrap();

    let flipped = TestDirectionConfig::default().with(Test::TrailMakingA, Orientation::Higher);
    let dir_file = dir.path().join("directions.txt");
    std::fs::write(&dir_file, flipped.to_kv_string()).unwrap();
    let parsed = TestDirectionConfig::load(&dir_file).unwrap();
    assert_eq!(parsed, flipped);

    let loaded = load_cohort(&csv, &parsed).unwrap();
    let default_loaded = load_cohort(&csv, &TestDirectionConfig::default()).unwrap();
    assert_ne!(loaded.fingerprint(), default_loaded.fingerprint());
    // trail_making_a feeds information-processing speed only
    let mut moved = 0;
    for (a, b) in loaded.profiles().iter().zip(default_loaded.profiles()) {
        for t in Trait::ALL {
            if t != Trait::InformationProcessingSpeed {
                assert_eq!(a.score(t), b.score(t));
            }
        }
        moved += usize::from(
            a.score(Trait::InformationProcessingSpeed)
                != b.score(Trait::InformationProcessingSpeed),
        );
    }
    assert!(moved > 0);
}

#[test]
fn missing_file_and_bad_rows_are_reported() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.csv");
    assert!(matches!(
        load_cohort(&missing, &TestDirectionConfig::default()),
        Err(CohortError::Io { .. })
    ));

    let cohort = generate_synthetic_cohort(&SyntheticSpec::default().with_size(10), 1).unwrap();
    let text = cohort.to_csv().replacen("female", "female,extra", 1);
    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, text).unwrap();
    assert!(load_cohort(&bad, &TestDirectionConfig::default()).is_err());

    let header_only: String = cohort.to_csv().lines().next().unwrap().to_string() + "\n";
    std::fs::write(&bad, header_only).unwrap();
    assert!(matches!(
        load_cohort(&bad, &TestDirectionConfig::default()),
        Err(CohortError::EmptyCohort)
    ));
}
