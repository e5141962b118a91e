//! # adeflow
//!
//! Adverse drug event detection from heterogeneous EHR events, as a
//! three-stage workflow: aggregate windowed events into a feature matrix,
//! eliminate features recursively with a random forest, and predict with
//! cross-validated classifiers. A statistics layer compares integration
//! approaches with the Friedman test and Nemenyi critical differences.
//!
//! ```no_run
//! use adeflow::prelude::*;
//!
//! # fn main() -> adeflow::Result<()> {
//! let file = std::fs::File::open("events.csv")?;
//! let parsed = parse_events(file, EventFormat::Csv)?;
//! let cohort = build_cohort(&parsed.records, &CohortConfig::new("D61.1", 90))?;
//! let matrix = build_matrix(&cohort)?;
//!
//! let folds = stratified_kfold(&matrix.labels, 10, 7)?;
//! let lmd = project(&matrix, IntegrationApproach::LMD)?;
//! let aucs = cross_validate(&lmd, &ClassifierSpec::random_forest(), &folds)?;
//! println!("mean AUC {:.4}", adeflow::eval::mean(&aucs));
//! # Ok(())
//! # }
//! ```
//!
//! Modules, in pipeline order: [`ehr`], [`ingest`], [`aggregate`],
//! [`learn`], [`rfe`], [`eval`], [`stats`]. [`synth`] generates planted
//! cohorts in the ingest format; [`pipeline`] wires everything behind a
//! TOML run configuration.

pub mod aggregate;
pub mod ehr;
pub mod error;
pub mod eval;
pub mod ingest;
pub mod learn;
pub mod pipeline;
pub mod rfe;
pub mod seed;
pub mod stats;
pub mod synth;

pub use error::{Error, Result};

pub mod prelude {
    pub use crate::aggregate::{
        aggregate_record, build_matrix, count_categorical, lr_transform, project, FeatureKey,
        FeatureMatrix, IntegrationApproach, LabTransform, Source,
    };
    pub use crate::ehr::{slice_window, validate_record, Cohort, Event, EventKind, PatientRecord, Window};
    pub use crate::eval::{
        auc, cross_validate, results_grid, stratified_kfold, EvaluationReport, GridConfig,
        NamedClassifier,
    };
    pub use crate::ingest::{build_cohort, parse_events, CohortConfig, ControlIndexPolicy, EventFormat};
    pub use crate::learn::{train, ClassWeight, ClassifierKind, ClassifierSpec, TrainedModel};
    pub use crate::rfe::{run_rfe, EliminationRule, RfeConfig};
    pub use crate::stats::{average_ranks, friedman_test, nemenyi, ScoreTable};
    pub use crate::synth::{generate, SynthConfig};
}
