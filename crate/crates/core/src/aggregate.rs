//! Windowed feature aggregation.
//!
//! Each cohort member's in-window events become one row: categorical codes
//! are counted, lab series are reduced to a single trend value. Columns are
//! keyed by source (`L`, `M`, `D`) and code, ordered by source then code.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ehr::{slice_window, Cohort, Day, Event, EventKind, PatientRecord, Window};
use crate::error::{Error, Result};

/// Where a feature comes from: labs, medications, or diagnoses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Source {
    L,
    M,
    D,
}

impl Source {
    pub const ALL: [Source; 3] = [Source::L, Source::M, Source::D];

    pub fn of(kind: EventKind) -> Source {
        match kind {
            EventKind::Lab => Source::L,
            EventKind::Drug => Source::M,
            EventKind::Diagnosis => Source::D,
        }
    }

    fn bit(self) -> u8 {
        match self {
            Source::L => 1,
            Source::M => 2,
            Source::D => 4,
        }
    }

    fn letter(self) -> char {
        match self {
            Source::L => 'L',
            Source::M => 'M',
            Source::D => 'D',
        }
    }
}

/// A column identity, rendered as `<source>:<code>`.
///
/// The derived ordering (source, then code) is the canonical column order.
/// Serializes as its rendered name.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FeatureKey {
    pub source: Source,
    pub code: String,
}

impl FeatureKey {
    pub fn new(source: Source, code: impl Into<String>) -> Self {
        FeatureKey {
            source,
            code: code.into(),
        }
    }
}

impl fmt::Display for FeatureKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.source.letter(), self.code)
    }
}

impl FromStr for FeatureKey {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (src, code) = s
            .split_once(':')
            .ok_or_else(|| Error::InvalidInput(format!("feature name `{s}` lacks a source prefix")))?;
        let source = match src {
            "L" => Source::L,
            "M" => Source::M,
            "D" => Source::D,
            other => {
                return Err(Error::InvalidInput(format!(
                    "unknown feature source `{other}` in `{s}`"
                )))
            }
        };
        if code.is_empty() {
            return Err(Error::InvalidInput(format!("feature name `{s}` has an empty code")));
        }
        Ok(FeatureKey::new(source, code))
    }
}

impl Serialize for FeatureKey {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for FeatureKey {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Tabular view of a cohort: one row per patient, one column per feature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    pub feature_keys: Vec<FeatureKey>,
    pub rows: Vec<Vec<f64>>,
    pub labels: Vec<bool>,
    pub patient_ids: Vec<String>,
    pub window_length: Day,
}

impl FeatureMatrix {
    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_cols(&self) -> usize {
        self.feature_keys.len()
    }

    pub fn n_positive(&self) -> usize {
        self.labels.iter().filter(|&&l| l).count()
    }

    /// Columns at `indices`, in the given order.
    pub fn select_columns(&self, indices: &[usize]) -> FeatureMatrix {
        FeatureMatrix {
            feature_keys: indices.iter().map(|&j| self.feature_keys[j].clone()).collect(),
            rows: self
                .rows
                .iter()
                .map(|r| indices.iter().map(|&j| r[j]).collect())
                .collect(),
            labels: self.labels.clone(),
            patient_ids: self.patient_ids.clone(),
            window_length: self.window_length,
        }
    }

    /// Keeps the named columns, in matrix order. Unknown keys are an error.
    pub fn select_keys(&self, keys: &[FeatureKey]) -> Result<FeatureMatrix> {
        let wanted: BTreeSet<&FeatureKey> = keys.iter().collect();
        for key in &wanted {
            if !self.feature_keys.contains(key) {
                return Err(Error::InvalidInput(format!("matrix has no column `{key}`")));
            }
        }
        let indices: Vec<usize> = (0..self.n_cols())
            .filter(|&j| wanted.contains(&self.feature_keys[j]))
            .collect();
        Ok(self.select_columns(&indices))
    }

    /// Rows at `indices`, in the given order.
    pub fn select_rows(&self, indices: &[usize]) -> FeatureMatrix {
        FeatureMatrix {
            feature_keys: self.feature_keys.clone(),
            rows: indices.iter().map(|&i| self.rows[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            patient_ids: indices.iter().map(|&i| self.patient_ids[i].clone()).collect(),
            window_length: self.window_length,
        }
    }

    pub fn feature_names(&self) -> Vec<String> {
        self.feature_keys.iter().map(|k| k.to_string()).collect()
    }

    /// Writes `patient_id,label,<feature names…>`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut writer = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(out);
        let mut header = vec!["patient_id".to_string(), "label".to_string()];
        header.extend(self.feature_names());
        writer.write_record(&header)?;
        for ((id, label), row) in self.patient_ids.iter().zip(&self.labels).zip(&self.rows) {
            let mut rec = vec![id.clone(), if *label { "1" } else { "0" }.to_string()];
            rec.extend(row.iter().map(|v| v.to_string()));
            writer.write_record(&rec)?;
        }
        writer.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R, window_length: Day) -> Result<FeatureMatrix> {
        let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
        let header = reader.headers()?.clone();
        if header.len() < 2 || &header[0] != "patient_id" || &header[1] != "label" {
            return Err(Error::InvalidInput(
                "feature matrix header must start with patient_id,label".into(),
            ));
        }
        let feature_keys = header
            .iter()
            .skip(2)
            .map(FeatureKey::from_str)
            .collect::<Result<Vec<_>>>()?;
        let mut m = FeatureMatrix {
            feature_keys,
            rows: Vec::new(),
            labels: Vec::new(),
            patient_ids: Vec::new(),
            window_length,
        };
        for rec in reader.records() {
            let rec = rec?;
            m.patient_ids.push(rec[0].to_string());
            m.labels.push(match &rec[1] {
                "1" => true,
                "0" => false,
                other => return Err(Error::InvalidInput(format!("bad label `{other}`"))),
            });
            let row = rec
                .iter()
                .skip(2)
                .map(|v| {
                    v.parse::<f64>()
                        .map_err(|_| Error::InvalidInput(format!("bad feature value `{v}`")))
                })
                .collect::<Result<Vec<_>>>()?;
            m.rows.push(row);
        }
        Ok(m)
    }
}

/// Subset of sources used for training, optionally restricted to the
/// columns retained by recursive elimination.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct IntegrationApproach {
    mask: u8,
    kbest: bool,
}

impl IntegrationApproach {
    pub const L: Self = Self::of(1, false);
    pub const M: Self = Self::of(2, false);
    pub const D: Self = Self::of(4, false);
    pub const LM: Self = Self::of(3, false);
    pub const LD: Self = Self::of(5, false);
    pub const MD: Self = Self::of(6, false);
    pub const LMD: Self = Self::of(7, false);
    pub const LMD_KBEST: Self = Self::of(7, true);

    /// The eight canonical approaches, in reporting order.
    pub const CANONICAL: [Self; 8] = [
        Self::L,
        Self::M,
        Self::D,
        Self::LM,
        Self::LD,
        Self::MD,
        Self::LMD,
        Self::LMD_KBEST,
    ];

    const fn of(mask: u8, kbest: bool) -> Self {
        IntegrationApproach { mask, kbest }
    }

    pub fn includes(&self, source: Source) -> bool {
        self.mask & source.bit() != 0
    }

    pub fn is_kbest(&self) -> bool {
        self.kbest
    }

    pub fn sources(&self) -> Vec<Source> {
        Source::ALL.into_iter().filter(|s| self.includes(*s)).collect()
    }

    /// Source-wise intersection, or `None` when empty.
    pub fn intersect(&self, other: &Self) -> Option<Self> {
        let mask = self.mask & other.mask;
        (mask != 0).then_some(Self::of(mask, false))
    }
}

impl fmt::Display for IntegrationApproach {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for s in self.sources() {
            write!(f, "{}", s.letter())?;
        }
        if self.kbest {
            f.write_str("-kbest")?;
        }
        Ok(())
    }
}

impl FromStr for IntegrationApproach {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::CANONICAL
            .into_iter()
            .find(|a| a.to_string() == s)
            .ok_or_else(|| Error::InvalidInput(format!("unknown integration approach `{s}`")))
    }
}

impl Serialize for IntegrationApproach {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for IntegrationApproach {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Reduction applied to each in-window lab series.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabTransform {
    /// Least-squares slope of value against day.
    #[default]
    Slope,
    LastValue,
    Mean,
}

impl LabTransform {
    /// `None` when the series is empty.
    pub fn apply(self, points: &[(Day, f64)]) -> Option<f64> {
        match self {
            LabTransform::Slope => lr_transform(points),
            LabTransform::LastValue => points.last().map(|p| p.1),
            LabTransform::Mean => {
                (!points.is_empty()).then(|| points.iter().map(|p| p.1).sum::<f64>() / points.len() as f64)
            }
        }
    }
}

/// Occurrence counts of each distinct code of `source` among `events`.
pub fn count_categorical(events: &[Event], source: Source) -> BTreeMap<FeatureKey, usize> {
    let mut counts = BTreeMap::new();
    for e in events.iter().filter(|e| Source::of(e.kind) == source) {
        *counts.entry(FeatureKey::new(source, e.code.clone())).or_insert(0) += 1;
    }
    counts
}

/// Trend of a lab series: the ordinary least-squares slope of value on day.
///
/// Returns `Some(0.0)` when the slope is undefined (one point, or all points
/// on the same day) or the series is constant, and `None` for an empty series.
pub fn lr_transform(points: &[(Day, f64)]) -> Option<f64> {
    match points.len() {
        0 => None,
        1 => Some(0.0),
        _ if points.iter().all(|p| p.1 == points[0].1) => Some(0.0),
        n => {
            let n = n as f64;
            let t_mean = points.iter().map(|p| p.0 as f64).sum::<f64>() / n;
            let v_mean = points.iter().map(|p| p.1).sum::<f64>() / n;
            let (mut sxy, mut sxx) = (0.0, 0.0);
            for &(t, v) in points {
                let dt = t as f64 - t_mean;
                sxy += dt * (v - v_mean);
                sxx += dt * dt;
            }
            Some(if sxx == 0.0 { 0.0 } else { sxy / sxx })
        }
    }
}

/// Feature map of one record over `window`, using the slope transform.
pub fn aggregate_record(
    record: &PatientRecord,
    window: Window,
    target_code: &str,
) -> BTreeMap<FeatureKey, f64> {
    aggregate_record_with(record, window, target_code, LabTransform::Slope)
}

pub fn aggregate_record_with(
    record: &PatientRecord,
    window: Window,
    target_code: &str,
    transform: LabTransform,
) -> BTreeMap<FeatureKey, f64> {
    let events: Vec<Event> = slice_window(record, window)
        .into_iter()
        .filter(|e| e.code != target_code)
        .collect();
    let mut features = BTreeMap::new();

    let mut series: BTreeMap<&str, Vec<(Day, f64)>> = BTreeMap::new();
    for e in events.iter().filter(|e| e.kind == EventKind::Lab) {
        if let Some(v) = e.value {
            series.entry(e.code.as_str()).or_default().push((e.timestamp, v));
        }
    }
    for (code, points) in series {
        if let Some(v) = transform.apply(&points) {
            features.insert(FeatureKey::new(Source::L, code), v);
        }
    }
    for source in [Source::M, Source::D] {
        for (key, count) in count_categorical(&events, source) {
            features.insert(key, count as f64);
        }
    }
    features
}

/// Aggregates every cohort member and assembles the dense matrix.
pub fn build_matrix(cohort: &Cohort) -> Result<FeatureMatrix> {
    build_matrix_with(cohort, LabTransform::Slope)
}

pub fn build_matrix_with(cohort: &Cohort, transform: LabTransform) -> Result<FeatureMatrix> {
    cohort.check_learnable()?;
    let per_member: Vec<BTreeMap<FeatureKey, f64>> = cohort
        .members
        .par_iter()
        .map(|m| aggregate_record_with(&m.record, m.window, &cohort.target_code, transform))
        .collect();
    let keys: BTreeSet<&FeatureKey> = per_member.iter().flat_map(|f| f.keys()).collect();
    let feature_keys: Vec<FeatureKey> = keys.into_iter().cloned().collect();
    let rows = per_member
        .iter()
        .map(|f| {
            feature_keys
                .iter()
                .map(|k| f.get(k).copied().filter(|v| v.is_finite()).unwrap_or(0.0))
                .collect()
        })
        .collect();
    Ok(FeatureMatrix {
        feature_keys,
        rows,
        labels: cohort.members.iter().map(|m| m.label.is_positive()).collect(),
        patient_ids: cohort
            .members
            .iter()
            .map(|m| m.record.patient_id.clone())
            .collect(),
        window_length: cohort.members.first().map(|m| m.window.span()).unwrap_or(0),
    })
}

/// Keeps the columns whose source belongs to `approach`.
pub fn project(matrix: &FeatureMatrix, approach: IntegrationApproach) -> Result<FeatureMatrix> {
    if approach.is_kbest() {
        return Err(Error::RequiresElimination(approach.to_string()));
    }
    let indices: Vec<usize> = (0..matrix.n_cols())
        .filter(|&j| approach.includes(matrix.feature_keys[j].source))
        .collect();
    Ok(matrix.select_columns(&indices))
}
