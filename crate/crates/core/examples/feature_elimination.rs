//! Recursive feature elimination on a synthetic cohort, checked against the
//! generator's planted keys.
//!
//! ```text
//! cargo run --release --example feature_elimination -- [seed] [k] [beta]
//! ```

use adeflow::prelude::*;
use adeflow::rfe::StopReason;

fn main() -> adeflow::Result<()> {
    let mut args = std::env::args().skip(1);
    let seed: u64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(1);
    let k: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(10);
    let beta: f64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(f64::INFINITY);

    let synth = generate(&SynthConfig::canonical(seed))?;
    let parsed = parse_events(synth.events_csv.as_slice(), EventFormat::Csv)?;
    let cohort = build_cohort(&parsed.records, &CohortConfig::new("D61.1", 90))?;
    let matrix = build_matrix(&cohort)?;

    let config = RfeConfig::new(k).with_beta(beta).with_seed(seed);
    let spec = ClassifierSpec::random_forest().with_seed(seed);
    let outcome = run_rfe(&matrix, &spec, &config)?;

    for step in outcome.trace.steps.iter().rev().take(5).rev() {
        println!("iter {:>3}  remaining {:>3}  val AUC {:.4}", step.iteration, step.remaining, step.val_auc);
    }
    match &outcome.trace.stop {
        StopReason::ReachedK => println!("stopped: reached k = {k}"),
        StopReason::AucDrop { rejected, val_auc, best_auc } => println!(
            "stopped: removing {} would give AUC {val_auc:.4} against best {best_auc:.4}",
            rejected.iter().map(ToString::to_string).collect::<Vec<_>>().join(", ")
        ),
        StopReason::NoCandidates => println!("stopped: no candidates"),
    }

    let planted = synth.manifest.informative_keys();
    println!("selected {} features:", outcome.selected.len());
    for key in &outcome.selected {
        let mark = if planted.contains(key) { "  (planted)" } else { "" };
        println!("  {key}{mark}");
    }
    let kept = planted.iter().filter(|p| outcome.selected.contains(p)).count();
    println!("{kept} of {} planted keys kept", planted.len());
    Ok(())
}
