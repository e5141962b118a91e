//! Writes a synthetic event log and its ground-truth manifest.
//!
//! ```text
//! cargo run --example generate_cohort -- [out_dir] [seed]
//! ```

use std::path::PathBuf;

use adeflow::pipeline::{manifest_path, synth_to_files};
use adeflow::synth::{CodeDistribution, SynthConfig};

fn main() -> adeflow::Result<()> {
    let mut args = std::env::args().skip(1);
    let dir = PathBuf::from(args.next().unwrap_or_else(|| "synthetic".into()));
    let seed: u64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(1);

    let canonical = SynthConfig::canonical(seed);
    let events = dir.join("canonical.csv");
    let manifest = synth_to_files(&canonical, &events, &manifest_path(&events))?;
    println!("{}: {} patients, {} positive", events.display(), manifest.n_patients, manifest.n_positive);
    for p in &manifest.informative {
        println!("  planted {:<12} {:?} {:+}", p.key.to_string(), p.effect, p.magnitude);
    }

    // Skewed background frequencies and no signal, e.g. for null studies.
    let null = SynthConfig {
        code_distribution: CodeDistribution::Zipf { exponent: 1.1 },
        ..canonical.without_signal()
    };
    let events = dir.join("null_zipf.csv");
    synth_to_files(&null, &events, &manifest_path(&events))?;
    println!("{}: same cohort, Zipf codes, no planted signal", events.display());
    Ok(())
}
