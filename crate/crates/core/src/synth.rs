//! Seeded synthetic cohorts with planted, source-attributed signal.
//!
//! Output is an event file in the ingest CSV format plus a manifest naming
//! the informative keys, so every downstream stage runs on the same path as
//! real data and tests can check recovered signal against ground truth.
//!
//! Generation model, per patient:
//! - history spans `pre_window_days + window_length_days` days ending at an
//!   index day; positives carry one target diagnosis on that day;
//! - categorical background events are spread uniformly over the history,
//!   codes drawn uniformly (or Zipf-weighted);
//! - each background lab code is observed with probability `lab_presence`
//!   as a short series around a patient-specific random trend;
//! - informative lab codes are observed for every patient; positives get
//!   the configured slope shift;
//! - informative categorical codes get Poisson(`magnitude`) extra in-window
//!   occurrences for positives.

use std::collections::BTreeSet;

use chrono::{Duration, NaiveDate};
use rand::distributions::{Distribution, WeightedIndex};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::aggregate::{FeatureKey, Source};
use crate::error::{Error, Result};
use crate::ingest::{write_events_csv, EventFileRow, RowKind};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Effect {
    /// Extra occurrences of a categorical code (Poisson mean = magnitude).
    CountShift,
    /// Added to the lab trend, in value units per day.
    SlopeShift,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlantedEffect {
    pub key: FeatureKey,
    pub effect: Effect,
    pub magnitude: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum CodeDistribution {
    #[default]
    Uniform,
    Zipf {
        exponent: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthConfig {
    pub n_patients: usize,
    pub positive_fraction: f64,
    pub n_lab_codes: usize,
    pub n_drug_codes: usize,
    pub n_diag_codes: usize,
    pub informative: Vec<PlantedEffect>,
    /// Mean number of categorical background events per patient.
    pub events_per_patient: usize,
    pub window_length_days: u32,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_target")]
    pub target_code: String,
    #[serde(default = "default_pre_window")]
    pub pre_window_days: u32,
    #[serde(default)]
    pub code_distribution: CodeDistribution,
    #[serde(default = "default_lab_presence")]
    pub lab_presence: f64,
    #[serde(default = "default_slope_sd")]
    pub lab_slope_sd: f64,
    #[serde(default = "default_noise_sd")]
    pub lab_noise_sd: f64,
}

fn default_target() -> String {
    "D61.1".into()
}
fn default_pre_window() -> u32 {
    30
}
fn default_lab_presence() -> f64 {
    0.5
}
fn default_slope_sd() -> f64 {
    0.05
}
fn default_noise_sd() -> f64 {
    2.0
}

impl SynthConfig {
    /// The repository's benchmark cohort: 400 patients, 20% positive,
    /// 100 codes, 5 informative keys over L, M and D.
    pub fn canonical(seed: u64) -> Self {
        SynthConfig {
            n_patients: 400,
            positive_fraction: 0.2,
            n_lab_codes: 20,
            n_drug_codes: 40,
            n_diag_codes: 40,
            informative: vec![
                planted(Source::L, "NPU03568", Effect::SlopeShift, -0.08),
                planted(Source::L, "NPU01944", Effect::SlopeShift, -0.06),
                planted(Source::M, "A04AA01", Effect::CountShift, 2.0),
                planted(Source::M, "L01BA01", Effect::CountShift, 1.5),
                planted(Source::D, "Z51.1", Effect::CountShift, 2.0),
            ],
            events_per_patient: 60,
            window_length_days: 90,
            seed,
            target_code: default_target(),
            pre_window_days: default_pre_window(),
            code_distribution: CodeDistribution::Uniform,
            lab_presence: default_lab_presence(),
            lab_slope_sd: default_slope_sd(),
            lab_noise_sd: default_noise_sd(),
        }
    }

    /// Same cohort with every planted magnitude set to zero.
    pub fn without_signal(mut self) -> Self {
        for p in &mut self.informative {
            p.magnitude = 0.0;
        }
        self
    }

    pub fn n_positive(&self) -> usize {
        (self.n_patients as f64 * self.positive_fraction).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |key: &str, message: String| Err(Error::ConfigKey { key: key.into(), message });
        if !(self.positive_fraction > 0.0 && self.positive_fraction < 1.0) {
            return bad("positive_fraction", "must lie in (0, 1)".into());
        }
        let pos = self.n_positive();
        if pos == 0 || pos == self.n_patients {
            return bad("n_patients", format!("{} patients leave a single class", self.n_patients));
        }
        if self.window_length_days < 1 {
            return bad("window_length_days", "must be at least 1".into());
        }
        if !(0.0..=1.0).contains(&self.lab_presence) {
            return bad("lab_presence", "must lie in [0, 1]".into());
        }
        if !(self.lab_slope_sd >= 0.0 && self.lab_noise_sd >= 0.0) {
            return bad("lab_noise_sd", "standard deviations must be non-negative".into());
        }
        if let CodeDistribution::Zipf { exponent } = self.code_distribution {
            if !(exponent > 0.0 && exponent.is_finite()) {
                return bad("code_distribution", "zipf exponent must be positive".into());
            }
        }
        let mut seen = BTreeSet::new();
        for p in &self.informative {
            if !p.magnitude.is_finite() {
                return bad("informative", format!("non-finite magnitude for {}", p.key));
            }
            if !seen.insert(&p.key) {
                return bad("informative", format!("{} listed twice", p.key));
            }
            let expected = match p.key.source {
                Source::L => Effect::SlopeShift,
                Source::M | Source::D => Effect::CountShift,
            };
            if p.effect != expected {
                return bad("informative", format!("{} cannot carry {:?}", p.key, p.effect));
            }
            if p.key.code == self.target_code {
                return bad("informative", "the target code cannot be informative".into());
            }
        }
        for (source, n, key) in [
            (Source::L, self.n_lab_codes, "n_lab_codes"),
            (Source::M, self.n_drug_codes, "n_drug_codes"),
            (Source::D, self.n_diag_codes, "n_diag_codes"),
        ] {
            let planted = self.informative.iter().filter(|p| p.key.source == source).count();
            if planted > n {
                return bad(key, format!("{planted} informative keys exceed {n} codes"));
            }
        }
        if self.n_drug_codes + self.n_diag_codes == 0 && self.events_per_patient > 0 {
            return bad("events_per_patient", "no categorical codes to draw from".into());
        }
        Ok(())
    }

    /// Code universe of `source`: informative codes first, then fillers.
    pub fn codes(&self, source: Source) -> Vec<String> {
        let (n, filler): (usize, fn(usize) -> String) = match source {
            Source::L => (self.n_lab_codes, |j| format!("NPU9{j:04}")),
            Source::M => (self.n_drug_codes, |j| format!("N{:02}BX{:02}", j / 100 + 1, j % 100)),
            Source::D => (self.n_diag_codes, |j| format!("R{:02}.{}", j / 10, j % 10)),
        };
        let mut codes: Vec<String> = self
            .informative
            .iter()
            .filter(|p| p.key.source == source)
            .map(|p| p.key.code.clone())
            .collect();
        let mut j = 0;
        while codes.len() < n {
            let c = filler(j);
            if !codes.contains(&c) && c != self.target_code {
                codes.push(c);
            }
            j += 1;
        }
        codes
    }
}

fn planted(source: Source, code: &str, effect: Effect, magnitude: f64) -> PlantedEffect {
    PlantedEffect {
        key: FeatureKey::new(source, code),
        effect,
        magnitude,
    }
}

/// Ground truth written next to the event file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub seed: u64,
    pub target_code: String,
    pub window_length_days: u32,
    pub n_patients: usize,
    pub n_positive: usize,
    pub n_negative: usize,
    pub informative: Vec<PlantedEffect>,
    pub negative_class: ClassParameters,
    pub positive_class: ClassParameters,
    pub lab_codes: Vec<String>,
    pub drug_codes: Vec<String>,
    pub diag_codes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassParameters {
    pub categorical_events_mean: usize,
    pub lab_presence: f64,
    pub lab_slope_mean: f64,
    pub lab_slope_sd: f64,
    pub lab_noise_sd: f64,
    /// Planted shifts applied to this class.
    pub shifts: Vec<PlantedEffect>,
}

impl Manifest {
    pub fn informative_keys(&self) -> Vec<FeatureKey> {
        self.informative.iter().map(|p| p.key.clone()).collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

#[derive(Debug, Clone)]
pub struct SynthOutput {
    /// Event file in the ingest CSV format.
    pub events_csv: Vec<u8>,
    pub manifest: Manifest,
}

const EPOCH: (i32, u32, u32) = (2010, 1, 1);

/// Generates the event file and manifest. Deterministic per `config.seed`.
pub fn generate(config: &SynthConfig) -> Result<SynthOutput> {
    config.validate()?;
    let labs = config.codes(Source::L);
    let drugs = config.codes(Source::M);
    let diags = config.codes(Source::D);
    let categorical: Vec<(RowKind, &str)> = drugs
        .iter()
        .map(|c| (RowKind::Drug, c.as_str()))
        .chain(diags.iter().map(|c| (RowKind::Diag, c.as_str())))
        .collect();
    let weights: Vec<f64> = match config.code_distribution {
        CodeDistribution::Uniform => vec![1.0; categorical.len()],
        CodeDistribution::Zipf { exponent } => (0..categorical.len())
            .map(|r| 1.0 / ((r + 1) as f64).powf(exponent))
            .collect(),
    };
    let picker = (!categorical.is_empty())
        .then(|| WeightedIndex::new(&weights).expect("weights are positive"));

    let n_pos = config.n_positive();
    let mut order: Vec<usize> = (0..config.n_patients).collect();
    order.shuffle(&mut seed::rng(seed::derive(&[config.seed, 0xC1A55])));
    let mut positive = vec![false; config.n_patients];
    for &i in &order[..n_pos] {
        positive[i] = true;
    }

    let ctx = Context {
        config,
        labs: &labs,
        categorical: &categorical,
        picker: picker.as_ref(),
        epoch: NaiveDate::from_ymd_opt(EPOCH.0, EPOCH.1, EPOCH.2).expect("valid epoch"),
    };
    let rows: Vec<Vec<EventFileRow>> = (0..config.n_patients)
        .into_par_iter()
        .map(|i| ctx.patient(i, positive[i]))
        .collect();
    let rows: Vec<EventFileRow> = rows.into_iter().flatten().collect();
    let mut events_csv = Vec::new();
    write_events_csv(&rows, &mut events_csv)?;

    let class = |shifts: Vec<PlantedEffect>| ClassParameters {
        categorical_events_mean: config.events_per_patient,
        lab_presence: config.lab_presence,
        lab_slope_mean: 0.0,
        lab_slope_sd: config.lab_slope_sd,
        lab_noise_sd: config.lab_noise_sd,
        shifts,
    };
    Ok(SynthOutput {
        events_csv,
        manifest: Manifest {
            seed: config.seed,
            target_code: config.target_code.clone(),
            window_length_days: config.window_length_days,
            n_patients: config.n_patients,
            n_positive: n_pos,
            n_negative: config.n_patients - n_pos,
            informative: config.informative.clone(),
            negative_class: class(Vec::new()),
            positive_class: class(config.informative.clone()),
            lab_codes: labs,
            drug_codes: drugs,
            diag_codes: diags,
        },
    })
}

struct Context<'a> {
    config: &'a SynthConfig,
    labs: &'a [String],
    categorical: &'a [(RowKind, &'a str)],
    picker: Option<&'a WeightedIndex<f64>>,
    epoch: NaiveDate,
}

impl Context<'_> {
    fn patient(&self, i: usize, positive: bool) -> Vec<EventFileRow> {
        let cfg = self.config;
        let mut rng = seed::rng(seed::derive(&[cfg.seed, i as u64]));
        let id = format!("P{i:05}");
        let window = i64::from(cfg.window_length_days);
        let history = window + i64::from(cfg.pre_window_days);
        let start = rng.gen_range(0..730i64);
        let index_day = start + history;
        // (day, kind, code, value)
        let mut events: Vec<(i64, RowKind, String, Option<f64>)> = Vec::new();

        if let Some(picker) = self.picker {
            let n = if cfg.events_per_patient == 0 {
                0
            } else {
                rng.gen_range(cfg.events_per_patient / 2..=cfg.events_per_patient * 3 / 2)
            };
            for _ in 0..n {
                let (kind, code) = self.categorical[picker.sample(&mut rng)];
                let day = rng.gen_range(start..=index_day);
                events.push((day, kind, code.to_string(), None));
            }
        }

        for code in self.labs {
            let planted = cfg
                .informative
                .iter()
                .find(|p| p.key.source == Source::L && &p.key.code == code);
            let (n_points, lo) = match planted {
                Some(_) => (rng.gen_range(3..=6), index_day - window),
                None if rng.gen_bool(cfg.lab_presence) => (rng.gen_range(1..=5), start),
                None => continue,
            };
            let baseline = 50.0 + 100.0 * unit_hash(code);
            let mut slope = cfg.lab_slope_sd * normal(&mut rng);
            if positive {
                if let Some(p) = planted {
                    slope += p.magnitude;
                }
            }
            for _ in 0..n_points {
                let day = rng.gen_range(lo..=index_day);
                let value = baseline + slope * (day - index_day) as f64 + cfg.lab_noise_sd * normal(&mut rng);
                events.push((day, RowKind::Lab, code.clone(), Some((value * 100.0).round() / 100.0)));
            }
        }

        if positive {
            for p in cfg.informative.iter().filter(|p| p.effect == Effect::CountShift) {
                let kind = if p.key.source == Source::M { RowKind::Drug } else { RowKind::Diag };
                for _ in 0..poisson(&mut rng, p.magnitude) {
                    let day = rng.gen_range(index_day - window..=index_day);
                    events.push((day, kind, p.key.code.clone(), None));
                }
            }
            events.push((index_day, RowKind::Diag, cfg.target_code.clone(), None));
        }

        events.sort_by_key(|e| e.0);
        events
            .into_iter()
            .map(|(day, kind, code, value)| EventFileRow {
                patient_id: id.clone(),
                kind,
                code,
                value,
                date: self.epoch + Duration::days(day),
            })
            .collect()
    }
}

/// Stable value in [0, 1) derived from a code name.
fn unit_hash(code: &str) -> f64 {
    (seed::mix(seed::hash_str(code)) >> 11) as f64 / (1u64 << 53) as f64
}

/// Standard normal draw (Box–Muller).
fn normal(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = 1.0 - rng.gen::<f64>();
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Poisson draw by inversion; `mean` is small here.
fn poisson(rng: &mut ChaCha8Rng, mean: f64) -> usize {
    if mean <= 0.0 {
        return 0;
    }
    let limit = (-mean).exp();
    let mut k = 0;
    let mut p = rng.gen::<f64>();
    while p > limit {
        k += 1;
        p *= rng.gen::<f64>();
    }
    k
}
