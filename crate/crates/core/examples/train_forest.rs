//! Fits the three classifier families on one synthetic cohort and prints
//! held-out AUC plus the forest's gini importances.
//!
//! ```text
//! cargo run --release --example train_forest -- [seed]
//! ```

use adeflow::prelude::*;
use adeflow::rfe::stratified_holdout;

fn main() -> adeflow::Result<()> {
    let seed: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(2);
    let synth = generate(&SynthConfig::canonical(seed))?;
    let parsed = parse_events(synth.events_csv.as_slice(), EventFormat::Csv)?;
    let matrix = build_matrix(&build_cohort(&parsed.records, &CohortConfig::new("D61.1", 90))?)?;

    let (train_idx, test_idx) = stratified_holdout(&matrix.labels, 0.3, seed)?;
    let train_m = matrix.select_rows(&train_idx);
    let test_m = matrix.select_rows(&test_idx);

    let specs = [
        ("random forest", ClassifierSpec::random_forest().with_seed(seed)),
        ("boosted trees", ClassifierSpec::gradient_boosting().with_seed(seed)),
        ("logistic (L2)", ClassifierSpec::linear()),
    ];
    let mut forest = None;
    for (name, spec) in specs {
        let model = train(&spec, &train_m)?;
        let scores = model.predict_proba(&test_m)?;
        println!("{name:<14} held-out AUC {:.4}", auc(&scores, &test_m.labels)?);
        if spec.kind == ClassifierKind::RandomForest {
            forest = Some(model);
        }
    }

    let planted = synth.manifest.informative_keys();
    let importances = forest.expect("forest trained").gini_importances()?;
    println!("\ntop features by gini importance:");
    for (key, value) in importances.ranked().into_iter().take(10) {
        let mark = if planted.contains(&key) { "  (planted)" } else { "" };
        println!("  {:<12} {value:.4}{mark}", key.to_string());
    }
    Ok(())
}
