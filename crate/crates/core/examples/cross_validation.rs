//! Ten-fold cross-validated AUC of a random forest on each integration
//! approach of a synthetic cohort.
//!
//! ```text
//! cargo run --release --example cross_validation -- [seed]
//! ```

use adeflow::eval::{mean, std_dev};
use adeflow::prelude::*;

fn main() -> adeflow::Result<()> {
    let seed: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(1);
    let synth = generate(&SynthConfig::canonical(seed))?;
    let parsed = parse_events(synth.events_csv.as_slice(), EventFormat::Csv)?;
    let cohort = build_cohort(&parsed.records, &CohortConfig::new("D61.1", 90))?;
    let matrix = build_matrix(&cohort)?;
    println!(
        "{} rows ({} positive), {} features",
        matrix.n_rows(),
        matrix.n_positive(),
        matrix.n_cols()
    );

    let folds = stratified_kfold(&matrix.labels, 10, seed)?;
    let spec = ClassifierSpec::random_forest().with_seed(seed);
    for approach in &IntegrationApproach::CANONICAL[..7] {
        let view = project(&matrix, *approach)?;
        let aucs = cross_validate(&view, &spec, &folds)?;
        println!("{:<4} {:>4} cols  AUC {:.4} ± {:.4}", approach, view.n_cols(), mean(&aucs), std_dev(&aucs));
    }
    Ok(())
}
