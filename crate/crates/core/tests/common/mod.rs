#![allow(dead_code)]

use std::path::PathBuf;

use adeflow::prelude::*;
use adeflow::synth::SynthOutput;

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

/// Event file → cohort → matrix, through the same path as the binary.
pub fn matrix_from(out: &SynthOutput, window: u32) -> FeatureMatrix {
    let parsed = parse_events(out.events_csv.as_slice(), EventFormat::Csv).unwrap();
    assert!(parsed.warnings.is_empty());
    let cohort = build_cohort(&parsed.records, &CohortConfig::new(out.manifest.target_code.clone(), window)).unwrap();
    build_matrix(&cohort).unwrap()
}

pub fn canonical(seed: u64) -> (SynthOutput, FeatureMatrix) {
    let out = generate(&SynthConfig::canonical(seed)).unwrap();
    let m = matrix_from(&out, 90);
    (out, m)
}

/// Mean 10-fold forest AUC with folds and forest both seeded by `seed`.
pub fn forest_cv(matrix: &FeatureMatrix, seed: u64) -> f64 {
    let folds = stratified_kfold(&matrix.labels, 10, seed).unwrap();
    let spec = ClassifierSpec::random_forest().with_seed(seed);
    adeflow::eval::mean(&cross_validate(matrix, &spec, &folds).unwrap())
}
