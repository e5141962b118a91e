//! Ground-truth checks of the generator through the full ingest path.

mod common;

use adeflow::prelude::*;
use adeflow::synth::SynthOutput;

use common::{canonical, forest_cv, matrix_from};

#[test]
fn round_trip_recovers_class_sizes() {
    for seed in [1, 2] {
        let cfg = SynthConfig::canonical(seed);
        let (out, m) = canonical(seed);
        assert_eq!(m.n_rows(), cfg.n_patients);
        assert_eq!(m.n_positive(), cfg.n_positive());
        assert_eq!(out.manifest.n_positive, cfg.n_positive());
        assert_eq!(m.window_length, 90);
        assert!(!m.feature_names().iter().any(|n| n.ends_with("D61.1")));
    }
}

#[test]
fn planted_columns_carry_the_signal() {
    let (out, m) = canonical(1);
    let planted = out.manifest.informative_keys();
    let keep: Vec<usize> = (0..m.n_cols())
        .filter(|&j| !planted.contains(&m.feature_keys[j]))
        .collect();
    assert_eq!(keep.len(), 95);
    let full = forest_cv(&m, 1);
    let stripped = forest_cv(&m.select_columns(&keep), 1);
    assert!(full - stripped >= 0.15, "full {full}, stripped {stripped}");
}

#[test]
fn zero_magnitude_is_chance() {
    let out: SynthOutput = generate(&SynthConfig::canonical(1).without_signal()).unwrap();
    let m = matrix_from(&out, 90);
    let a = forest_cv(&m, 1);
    assert!((0.4..=0.6).contains(&a), "AUC {a}");
}

#[test]
fn importances_rank_planted_keys_first() {
    let (out, m) = canonical(3);
    let model = train(&ClassifierSpec::random_forest().with_seed(3), &m).unwrap();
    let ranked = model.gini_importances().unwrap().ranked();
    let top: Vec<&FeatureKey> = ranked.iter().take(10).map(|(k, _)| k).collect();
    let hits = out.manifest.informative_keys().iter().filter(|k| top.contains(k)).count();
    assert!(hits >= 4, "top 10 {top:?}");
}
