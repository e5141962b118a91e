//! Turns a handful of hand-written events into a windowed feature matrix.
//!
//! ```text
//! cargo run --example aggregate_features
//! ```

use adeflow::aggregate::{build_matrix_with, LabTransform};
use adeflow::prelude::*;

const EVENTS: &str = "\
patient_id,kind,code,value,date
P1,lab,NPU03568,240,2021-01-02
P1,lab,NPU03568,180,2021-01-20
P1,lab,NPU03568,95,2021-02-10
P1,drug,L01BA01,,2021-01-05
P1,drug,L01BA01,,2021-01-19
P1,diag,D61.1,,2021-02-12
P2,lab,NPU03568,230,2021-01-10
P2,lab,NPU03568,236,2021-02-15
P2,drug,A04AA01,,2021-02-01
P2,diag,Z51.1,,2021-02-20
P3,drug,A04AA01,,2020-12-01
P3,diag,Z51.1,,2021-01-15
P3,diag,D61.1,,2021-01-16
P4,lab,NPU03568,210,2021-03-01
P4,diag,Z51.1,,2021-03-02
";

fn main() -> adeflow::Result<()> {
    let parsed = parse_events(EVENTS.as_bytes(), EventFormat::Csv)?;
    println!("day 0 is {}", parsed.epoch.expect("non-empty file"));
    let cohort = build_cohort(&parsed.records, &CohortConfig::new("D61.1", 60))?;
    for m in &cohort.members {
        println!(
            "{} {:?}: window days {}..={}",
            m.record.patient_id,
            m.label,
            m.window.t_start(),
            m.window.t_end()
        );
    }

    for transform in [LabTransform::Slope, LabTransform::LastValue] {
        let matrix = build_matrix_with(&cohort, transform)?;
        println!("\n{transform:?}:");
        matrix.write_csv(std::io::stdout())?;
    }

    let lab_only = project(&build_matrix(&cohort)?, IntegrationApproach::L)?;
    println!("\nL projection keeps {:?}", lab_only.feature_names());
    Ok(())
}
