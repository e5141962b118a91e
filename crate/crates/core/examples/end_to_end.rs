//! The whole workflow from a run configuration: generate events, then
//! ingest, aggregate, eliminate and evaluate, writing every report file.
//!
//! ```text
//! cargo run --release --example end_to_end -- [work_dir]
//! ```

use std::fs;
use std::path::PathBuf;

use adeflow::pipeline::{self, RunConfig};
use adeflow::synth::SynthConfig;

const CONFIG: &str = r#"
events = "events.csv"
output_dir = "report"
seed = 7
approaches = ["L", "M", "D", "LMD", "LMD-kbest"]

[cohort]
target_code = "D61.1"
window_length_days = 90

[[classifiers]]
name = "RF100"
kind = "random_forest"

[[classifiers]]
name = "GBT"
kind = "gradient_boosting"

[rfe]
k = 10
"#;

fn main() -> adeflow::Result<()> {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "adeflow-demo".into()));
    fs::create_dir_all(&dir)?;
    let events = dir.join("events.csv");
    pipeline::synth_to_files(&SynthConfig::canonical(7), &events, &pipeline::manifest_path(&events))?;
    fs::write(dir.join("run.toml"), CONFIG)?;

    let config = RunConfig::load(&dir.join("run.toml"))?;
    let report = pipeline::run(&config)?;

    println!("{} positives, {} controls, {} features", report.n_positive, report.n_negative, report.n_features);
    for cell in &report.evaluation.cells {
        println!(
            "{:<10} {:<6} {:.4} ± {:.4}",
            cell.approach.to_string(),
            cell.classifier,
            cell.mean_auc,
            cell.std_auc
        );
    }
    if let Some(kbest) = &report.evaluation.kbest {
        println!("\nLMD-kbest kept {} features ({:?})", kbest.outcome.selected.len(), kbest.outcome.trace.stop);
    }
    println!("reports in {}", config.output_dir.display());
    Ok(())
}
