//! Friedman and Nemenyi tests on the bundled random forest score table
//! (7 integration approaches over 5 adverse drug events).
//!
//! ```text
//! cargo run --example compare_approaches -- [table.csv] [alpha]
//! ```

use std::path::PathBuf;

use adeflow::pipeline::compare_file;

fn main() -> adeflow::Result<()> {
    let mut args = std::env::args().skip(1);
    let table = args
        .next()
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures/table1_rf.csv"));
    let alpha: f64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(0.05);

    let report = compare_file(&table, alpha)?;
    print!("{}", report.render());

    println!("\ncritical-difference diagram data:");
    report.nemenyi.write_cd_diagram_csv(std::io::stdout())?;
    Ok(())
}
