//! File-level orchestration behind the `adeflow` binary: run configuration,
//! the end-to-end run, synthetic generation and score-table comparison.
//!
//! A run configuration is TOML. Paths are resolved against the directory of
//! the configuration file; unknown keys are rejected at every level.
//!
//! ```toml
//! ade = "D61.1"
//! events = "events.csv"
//! output_dir = "out"
//! seed = 7
//! n_folds = 10
//! approaches = ["L", "LMD", "LMD-kbest"]
//!
//! [cohort]
//! target_code = "D61.1"
//! window_length_days = 90
//!
//! [[classifiers]]
//! name = "RF100"
//! kind = "random_forest"
//!
//! [rfe]
//! k = 10
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::aggregate::{build_matrix_with, FeatureMatrix, IntegrationApproach, LabTransform};
use crate::error::{Error, Result};
use crate::eval::{results_grid, EvaluationReport, GridConfig, NamedClassifier};
use crate::ingest::{build_cohort, parse_events, CohortConfig, EventFormat};
use crate::learn::{train, ClassifierSpec, ImportanceVector};
use crate::rfe::RfeConfig;
use crate::seed;
use crate::stats::{friedman_test, nemenyi, FriedmanResult, NemenyiResult, ScoreTable};
use crate::synth::{generate, Manifest, SynthConfig};

/// Environment variable read for the default worker count.
pub const THREADS_ENV: &str = "ADEFLOW_THREADS";

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRunConfig {
    ade: Option<String>,
    events: PathBuf,
    format: Option<EventFormat>,
    output_dir: PathBuf,
    #[serde(default)]
    seed: u64,
    #[serde(default = "default_folds")]
    n_folds: usize,
    approaches: Vec<IntegrationApproach>,
    #[serde(default)]
    lab_transform: LabTransform,
    cohort: CohortConfig,
    classifiers: Vec<toml::Table>,
    rfe: Option<RfeConfig>,
}

fn default_folds() -> usize {
    10
}

/// A validated run configuration with resolved paths.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub ade: String,
    pub events: PathBuf,
    pub format: EventFormat,
    pub output_dir: PathBuf,
    pub seed: u64,
    pub n_folds: usize,
    pub approaches: Vec<IntegrationApproach>,
    pub lab_transform: LabTransform,
    pub cohort: CohortConfig,
    pub classifiers: Vec<NamedClassifier>,
    pub rfe: Option<RfeConfig>,
}

/// Scalar values given on the command line; they replace the file's.
#[derive(Debug, Clone, Default)]
pub struct RunOverrides {
    pub seed: Option<u64>,
    pub n_folds: Option<usize>,
    pub output_dir: Option<PathBuf>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = read_config(path)?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        Self::from_toml(&text, base)
    }

    /// Parses and validates; relative paths are taken against `base`.
    pub fn from_toml(text: &str, base: &Path) -> Result<Self> {
        let raw: RawRunConfig = toml::from_str(text).map_err(|e| toml_error(text, &e))?;
        let mut classifiers = Vec::with_capacity(raw.classifiers.len());
        for (i, mut table) in raw.classifiers.into_iter().enumerate() {
            let name = match table.remove("name") {
                Some(toml::Value::String(s)) => s,
                _ => {
                    return Err(Error::ConfigKey {
                        key: format!("classifiers[{i}].name"),
                        message: "missing or not a string".into(),
                    })
                }
            };
            let spec: ClassifierSpec =
                toml::Value::Table(table)
                    .try_into()
                    .map_err(|e: toml::de::Error| Error::ConfigKey {
                        key: format!("classifiers[{i}]"),
                        message: e.message().to_string(),
                    })?;
            classifiers.push(NamedClassifier::new(name, spec));
        }
        let events = base.join(&raw.events);
        if !events.is_file() {
            return Err(Error::MissingPath(events));
        }
        let format = match raw.format {
            Some(f) => f,
            None => match events.extension().and_then(|e| e.to_str()) {
                Some("jsonl") | Some("ndjson") => EventFormat::Jsonl,
                _ => EventFormat::Csv,
            },
        };
        let config = RunConfig {
            ade: raw.ade.unwrap_or_else(|| raw.cohort.target_code.clone()),
            events,
            format,
            output_dir: base.join(raw.output_dir),
            seed: raw.seed,
            n_folds: raw.n_folds,
            approaches: raw.approaches,
            lab_transform: raw.lab_transform,
            cohort: raw.cohort,
            classifiers,
            rfe: raw.rfe,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn apply(&mut self, overrides: &RunOverrides) -> Result<()> {
        if let Some(s) = overrides.seed {
            self.seed = s;
        }
        if let Some(n) = overrides.n_folds {
            self.n_folds = n;
        }
        if let Some(d) = &overrides.output_dir {
            self.output_dir = d.clone();
        }
        self.validate()
    }

    pub fn grid(&self) -> GridConfig {
        GridConfig {
            ade: self.ade.clone(),
            approaches: self.approaches.clone(),
            classifiers: self.classifiers.clone(),
            n_folds: self.n_folds,
            seed: self.seed,
            rfe: self.rfe.clone(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_folds < 2 {
            return Err(Error::ConfigKey {
                key: "n_folds".into(),
                message: "must be at least 2".into(),
            });
        }
        self.cohort.validate()?;
        self.grid().validate()
    }
}

fn read_config(path: &Path) -> Result<String> {
    if !path.is_file() {
        return Err(Error::MissingPath(path.to_path_buf()));
    }
    Ok(fs::read_to_string(path)?)
}

// toml's own rendering spans several lines; keep one line and name the key.
fn toml_error(text: &str, e: &toml::de::Error) -> Error {
    let message = e.message().trim().to_string();
    let located = e.span().and_then(|span| {
        let line_no = text[..span.start.min(text.len())].matches('\n').count();
        let line = text.lines().nth(line_no)?;
        let key = line.split_once('=')?.0.trim();
        (!key.is_empty()).then(|| (line_no + 1, key.to_string()))
    });
    match located {
        Some((line, key)) => Error::ConfigKey {
            key,
            message: format!("{message} (line {line})"),
        },
        None => Error::Config(message),
    }
}

/// Everything a run produced, also written to the output directory.
#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub ade: String,
    pub n_patients_read: usize,
    pub n_rows_skipped: usize,
    pub n_positive: usize,
    pub n_negative: usize,
    pub n_features: usize,
    pub lab_transform: LabTransform,
    pub evaluation: EvaluationReport,
    /// Forest refitted on every cohort member over the richest approach.
    pub importance_approach: IntegrationApproach,
    pub importances: ImportanceVector,
}

pub const FOLDS_FILE: &str = "folds.csv";
pub const SUMMARY_FILE: &str = "summary.csv";
pub const RFE_TRACE_FILE: &str = "rfe_trace.csv";
pub const IMPORTANCES_FILE: &str = "importances.csv";
pub const FEATURES_FILE: &str = "features.csv";
pub const REPORT_FILE: &str = "report.json";

/// Ingest, aggregate, evaluate and write the report files.
pub fn run(config: &RunConfig) -> Result<RunReport> {
    config.validate()?;
    let file = fs::File::open(&config.events)
        .map_err(|e| Error::in_stage("ingest")(Error::Unreadable(e.to_string())))?;
    let parsed = parse_events(file, config.format).map_err(Error::in_stage("ingest"))?;
    let cohort = build_cohort(&parsed.records, &config.cohort).map_err(Error::in_stage("cohort"))?;
    let matrix =
        build_matrix_with(&cohort, config.lab_transform).map_err(Error::in_stage("aggregate"))?;
    let evaluation = results_grid(&matrix, &config.grid()).map_err(Error::in_stage("evaluate"))?;
    let (importance_approach, importances) =
        final_importances(config, &matrix, &evaluation).map_err(Error::in_stage("importance"))?;

    let report = RunReport {
        ade: config.ade.clone(),
        n_patients_read: parsed.records.len(),
        n_rows_skipped: parsed.warnings.len(),
        n_positive: cohort.n_positive(),
        n_negative: cohort.n_negative(),
        n_features: matrix.n_cols(),
        lab_transform: config.lab_transform,
        evaluation,
        importance_approach,
        importances,
    };
    write_run_outputs(&config.output_dir, &report, &matrix).map_err(Error::in_stage("report"))?;
    Ok(report)
}

fn final_importances(
    config: &RunConfig,
    matrix: &FeatureMatrix,
    evaluation: &EvaluationReport,
) -> Result<(IntegrationApproach, ImportanceVector)> {
    let (approach, view) = match evaluation.selected_features() {
        Some(selected) => (IntegrationApproach::LMD_KBEST, matrix.select_keys(selected)?),
        None => (IntegrationApproach::LMD, matrix.clone()),
    };
    let spec = config
        .grid()
        .elimination_spec()
        .with_seed(seed::derive(&[config.seed, seed::hash_str("final")]));
    let model = train(&spec, &view)?;
    Ok((approach, model.gini_importances()?))
}

fn write_run_outputs(dir: &Path, report: &RunReport, matrix: &FeatureMatrix) -> Result<()> {
    fs::create_dir_all(dir)?;
    report.evaluation.write_folds_csv(fs::File::create(dir.join(FOLDS_FILE))?)?;
    report.evaluation.write_summary_csv(fs::File::create(dir.join(SUMMARY_FILE))?)?;
    if let Some(kbest) = &report.evaluation.kbest {
        kbest.outcome.trace.write_csv(fs::File::create(dir.join(RFE_TRACE_FILE))?)?;
    }
    report.importances.write_csv(fs::File::create(dir.join(IMPORTANCES_FILE))?)?;
    matrix.write_csv(fs::File::create(dir.join(FEATURES_FILE))?)?;
    let mut json = serde_json::to_string_pretty(report)?;
    json.push('\n');
    fs::write(dir.join(REPORT_FILE), json)?;
    Ok(())
}

/// Reads a generator configuration (TOML, unknown keys rejected).
pub fn load_synth_config(path: &Path) -> Result<SynthConfig> {
    let text = read_config(path)?;
    let config: SynthConfig = toml::from_str(&text).map_err(|e| toml_error(&text, &e))?;
    config.validate()?;
    Ok(config)
}

/// `events.csv` → `events.manifest.json`.
pub fn manifest_path(events_out: &Path) -> PathBuf {
    events_out.with_extension("manifest.json")
}

/// Generates a cohort and writes the event file plus its manifest.
pub fn synth_to_files(config: &SynthConfig, events_out: &Path, manifest_out: &Path) -> Result<Manifest> {
    let out = generate(config)?;
    for p in [events_out, manifest_out] {
        if let Some(parent) = p.parent().filter(|p| !p.as_os_str().is_empty()) {
            fs::create_dir_all(parent)?;
        }
    }
    fs::write(events_out, &out.events_csv)?;
    let mut json = out.manifest.to_json()?;
    json.push('\n');
    fs::write(manifest_out, json)?;
    Ok(out.manifest)
}

#[derive(Debug, Clone, Serialize)]
pub struct CompareReport {
    pub friedman: FriedmanResult,
    pub nemenyi: NemenyiResult,
}

pub const FRIEDMAN_FILE: &str = "friedman.csv";
pub const NEMENYI_FILE: &str = "nemenyi.csv";
pub const CD_DIAGRAM_FILE: &str = "cd_diagram.csv";

/// Friedman and Nemenyi on a score table (higher is better).
pub fn compare(table: &ScoreTable, alpha: f64) -> Result<CompareReport> {
    Ok(CompareReport {
        friedman: friedman_test(table)?,
        nemenyi: nemenyi(table, alpha)?,
    })
}

pub fn compare_file(path: &Path, alpha: f64) -> Result<CompareReport> {
    if !path.is_file() {
        return Err(Error::MissingPath(path.to_path_buf()));
    }
    compare(&ScoreTable::read_csv(fs::File::open(path)?)?, alpha)
}

impl CompareReport {
    pub fn write_files(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        self.friedman.write_csv(fs::File::create(dir.join(FRIEDMAN_FILE))?)?;
        self.nemenyi.write_pairs_csv(fs::File::create(dir.join(NEMENYI_FILE))?)?;
        self.nemenyi.write_cd_diagram_csv(fs::File::create(dir.join(CD_DIAGRAM_FILE))?)?;
        Ok(())
    }

    /// Plain-text summary for terminals.
    pub fn render(&self) -> String {
        let f = &self.friedman;
        let n = &self.nemenyi;
        let mut s = format!(
            "Friedman over {} datasets x {} approaches\n  chi2_F = {:.4} (df {}), p = {:.4e}\n  Iman-Davenport F = {:.4} (df {}, {}), p = {:.4e}\n",
            f.n, f.k, f.chi_square, f.chi_square_df, f.chi_square_p, f.f_statistic, f.f_df1, f.f_df2, f.f_p
        );
        s.push_str(&format!(
            "Nemenyi alpha = {}: q = {:.3}, CD = {:.4}\n  average ranks:",
            n.alpha, n.q_alpha, n.critical_difference
        ));
        for (c, r) in n.columns.iter().zip(&n.average_ranks) {
            s.push_str(&format!(" {c}={r:.2}"));
        }
        s.push('\n');
        let flagged: Vec<_> = n.pairs.iter().filter(|p| p.significant).collect();
        if flagged.is_empty() {
            s.push_str("  no significant pairs\n");
        }
        for p in flagged {
            s.push_str(&format!(
                "  {} vs {}: |diff| = {:.2} >= CD\n",
                p.a,
                p.b,
                p.rank_difference.abs()
            ));
        }
        s
    }
}

/// Runs `f` on a dedicated pool of `threads` workers (`None`: rayon default).
pub fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        if n == 0 {
            return Err(Error::ConfigKey {
                key: "threads".into(),
                message: "must be at least 1".into(),
            });
        }
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dir_with_events() -> tempfile::TempDir {
        let d = tempfile::tempdir().unwrap();
        fs::write(d.path().join("events.csv"), "patient_id,kind,code,value,date\n").unwrap();
        d
    }

    const BASE: &str = r#"
events = "events.csv"
output_dir = "out"
approaches = ["L", "LMD"]

[cohort]
target_code = "D61.1"
window_length_days = 90

[[classifiers]]
name = "RF"
kind = "random_forest"
n_trees = 10
"#;

    #[test]
    fn parses_and_resolves_paths() {
        let d = dir_with_events();
        let c = RunConfig::from_toml(BASE, d.path()).unwrap();
        assert_eq!(c.events, d.path().join("events.csv"));
        assert_eq!(c.output_dir, d.path().join("out"));
        assert_eq!(c.ade, "D61.1");
        assert_eq!(c.n_folds, 10);
        assert_eq!(c.format, EventFormat::Csv);
        assert_eq!(c.classifiers[0].name, "RF");
        assert_eq!(c.classifiers[0].spec.n_trees, 10);
    }

    #[test]
    fn unknown_top_level_key_is_named() {
        let d = dir_with_events();
        let text = format!("bogus_key = 3\n{BASE}");
        let e = RunConfig::from_toml(&text, d.path()).unwrap_err();
        assert!(e.to_string().contains("bogus_key"), "{e}");
        assert_eq!(e.exit_code(), 1);
    }

    #[test]
    fn unknown_classifier_key_is_named() {
        let d = dir_with_events();
        let text = format!("{BASE}n_treez = 4\n");
        let e = RunConfig::from_toml(&text, d.path()).unwrap_err();
        assert!(e.to_string().contains("n_treez"), "{e}");
    }

    #[test]
    fn kbest_requires_rfe_section() {
        let d = dir_with_events();
        let text = BASE.replace(r#"["L", "LMD"]"#, r#"["L", "LMD-kbest"]"#);
        let e = RunConfig::from_toml(&text, d.path()).unwrap_err();
        assert!(e.to_string().contains("rfe"), "{e}");
    }

    #[test]
    fn missing_events_file() {
        let d = tempfile::tempdir().unwrap();
        let e = RunConfig::from_toml(BASE, d.path()).unwrap_err();
        assert!(matches!(e, Error::MissingPath(_)));
        assert_eq!(e.exit_code(), 1);
    }

    #[test]
    fn overrides_replace_scalars() {
        let d = dir_with_events();
        let mut c = RunConfig::from_toml(BASE, d.path()).unwrap();
        c.apply(&RunOverrides {
            seed: Some(9),
            n_folds: Some(5),
            output_dir: None,
        })
        .unwrap();
        assert_eq!((c.seed, c.n_folds), (9, 5));
        assert!(c
            .apply(&RunOverrides {
                n_folds: Some(1),
                ..Default::default()
            })
            .is_err());
    }

    #[test]
    fn zero_threads_rejected() {
        assert!(with_threads(Some(0), || ()).is_err());
        assert_eq!(with_threads(Some(2), rayon::current_num_threads).unwrap(), 2);
    }
}
