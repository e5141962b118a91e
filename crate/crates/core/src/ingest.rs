//! Event file parsing and cohort assembly.
//!
//! The interchange CSV has the fixed header `patient_id,kind,code,value,date`
//! with an empty `value` for categorical rows; JSONL carries one object per
//! line with the same five keys. Calendar dates become day indices counted
//! from the earliest date in the file.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use chrono::NaiveDate;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::ehr::{Cohort, CohortMember, Day, Event, EventKind, Label, PatientRecord, Window};
use crate::error::{Error, Result};
use crate::seed;

pub const CSV_HEADER: [&str; 5] = ["patient_id", "kind", "code", "value", "date"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EventFormat {
    Csv,
    Jsonl,
}

/// `lab`, `drug` or `diag` as written in event files.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RowKind {
    Lab,
    Drug,
    Diag,
}

impl RowKind {
    fn parse(s: &str) -> Option<Self> {
        match s {
            "lab" => Some(RowKind::Lab),
            "drug" => Some(RowKind::Drug),
            "diag" => Some(RowKind::Diag),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            RowKind::Lab => "lab",
            RowKind::Drug => "drug",
            RowKind::Diag => "diag",
        }
    }
}

impl From<RowKind> for EventKind {
    fn from(k: RowKind) -> Self {
        match k {
            RowKind::Lab => EventKind::Lab,
            RowKind::Drug => EventKind::Drug,
            RowKind::Diag => EventKind::Diagnosis,
        }
    }
}

/// One line of an event file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EventFileRow {
    pub patient_id: String,
    pub kind: RowKind,
    pub code: String,
    #[serde(default)]
    pub value: Option<f64>,
    pub date: NaiveDate,
}

impl EventFileRow {
    fn check(&self) -> std::result::Result<(), String> {
        if self.patient_id.is_empty() {
            return Err("empty patient_id".into());
        }
        if self.code.is_empty() {
            return Err("empty code".into());
        }
        match (self.kind, self.value) {
            (RowKind::Lab, None) => Err("lab row without value".into()),
            (RowKind::Lab, Some(v)) if !v.is_finite() => Err("non-finite lab value".into()),
            (RowKind::Drug | RowKind::Diag, Some(_)) => {
                Err(format!("value on categorical {} row", self.kind.as_str()))
            }
            _ => Ok(()),
        }
    }
}

/// A malformed row that was skipped.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RowWarning {
    pub line: u64,
    pub message: String,
}

#[derive(Debug, Clone, Default)]
pub struct ParsedEvents {
    pub records: BTreeMap<String, PatientRecord>,
    pub warnings: Vec<RowWarning>,
    /// Calendar date of day index 0, when any row was read.
    pub epoch: Option<NaiveDate>,
}

/// Parses an event stream into per-patient records.
///
/// Malformed rows are skipped and reported in `warnings`; only an unreadable
/// or non-UTF-8 stream is fatal.
pub fn parse_events<R: Read>(mut source: R, format: EventFormat) -> Result<ParsedEvents> {
    let mut bytes = Vec::new();
    source
        .read_to_end(&mut bytes)
        .map_err(|e| Error::Unreadable(e.to_string()))?;
    let text = String::from_utf8(bytes).map_err(|e| Error::Unreadable(e.to_string()))?;

    let (rows, warnings) = match format {
        EventFormat::Csv => read_csv_rows(&text)?,
        EventFormat::Jsonl => read_jsonl_rows(&text),
    };

    let epoch = rows.iter().map(|r| r.date).min();
    let mut grouped: BTreeMap<String, Vec<Event>> = BTreeMap::new();
    if let Some(epoch) = epoch {
        for row in rows {
            let day: Day = (row.date - epoch).num_days();
            grouped.entry(row.patient_id).or_default().push(Event {
                code: row.code,
                kind: row.kind.into(),
                value: row.value,
                timestamp: day,
            });
        }
    }
    let records = grouped
        .into_iter()
        .map(|(id, events)| {
            let record = PatientRecord::from_unsorted(id.clone(), events);
            (id, record)
        })
        .collect();
    Ok(ParsedEvents {
        records,
        warnings,
        epoch,
    })
}

fn read_csv_rows(text: &str) -> Result<(Vec<EventFileRow>, Vec<RowWarning>)> {
    let mut rows = Vec::new();
    let mut warnings = Vec::new();
    if text.trim().is_empty() {
        return Ok((rows, warnings));
    }
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(text.as_bytes());
    let header = reader
        .headers()
        .map_err(|e| Error::Unreadable(e.to_string()))?
        .clone();
    if header.iter().collect::<Vec<_>>() != CSV_HEADER {
        return Err(Error::Unreadable(format!(
            "expected header `{}`, found `{}`",
            CSV_HEADER.join(","),
            header.iter().collect::<Vec<_>>().join(",")
        )));
    }
    for result in reader.records() {
        let record = match result {
            Ok(r) => r,
            Err(e) => {
                let line = e.position().map(|p| p.line()).unwrap_or(0);
                warnings.push(RowWarning {
                    line,
                    message: e.to_string(),
                });
                continue;
            }
        };
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        match csv_row(&record) {
            Ok(row) => rows.push(row),
            Err(message) => warnings.push(RowWarning { line, message }),
        }
    }
    Ok((rows, warnings))
}

fn csv_row(record: &csv::StringRecord) -> std::result::Result<EventFileRow, String> {
    if record.len() != CSV_HEADER.len() {
        return Err(format!("expected 5 fields, found {}", record.len()));
    }
    let kind = RowKind::parse(&record[1]).ok_or_else(|| format!("unknown kind `{}`", &record[1]))?;
    let value = match record[3].trim() {
        "" => None,
        v => Some(
            v.parse::<f64>()
                .map_err(|_| format!("unparseable value `{v}`"))?,
        ),
    };
    let date = NaiveDate::parse_from_str(record[4].trim(), "%Y-%m-%d")
        .map_err(|_| format!("unparseable date `{}`", &record[4]))?;
    let row = EventFileRow {
        patient_id: record[0].to_string(),
        kind,
        code: record[2].to_string(),
        value,
        date,
    };
    row.check()?;
    Ok(row)
}

fn read_jsonl_rows(text: &str) -> (Vec<EventFileRow>, Vec<RowWarning>) {
    let mut rows = Vec::new();
    let mut warnings = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i as u64 + 1;
        if line.trim().is_empty() {
            continue;
        }
        let parsed = serde_json::from_str::<EventFileRow>(line)
            .map_err(|e| e.to_string())
            .and_then(|row| row.check().map(|_| row));
        match parsed {
            Ok(row) => rows.push(row),
            Err(message) => warnings.push(RowWarning {
                line: line_no,
                message,
            }),
        }
    }
    (rows, warnings)
}

/// Writes rows in the interchange CSV format (LF line endings).
pub fn write_events_csv<W: Write>(rows: &[EventFileRow], out: W) -> Result<()> {
    let mut writer = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    writer.write_record(CSV_HEADER)?;
    for row in rows {
        let value = row.value.map(|v| v.to_string()).unwrap_or_default();
        let date = row.date.format("%Y-%m-%d").to_string();
        writer.write_record([
            row.patient_id.as_str(),
            row.kind.as_str(),
            row.code.as_str(),
            value.as_str(),
            date.as_str(),
        ])?;
    }
    writer.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControlIndexPolicy {
    #[default]
    LastEvent,
    RandomEvent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CohortConfig {
    pub target_code: String,
    pub window_length_days: u32,
    #[serde(default)]
    pub control_index_policy: ControlIndexPolicy,
    #[serde(default = "default_true")]
    pub include_index_day: bool,
    #[serde(default)]
    pub min_events_in_window: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_true() -> bool {
    true
}

impl CohortConfig {
    pub fn new(target_code: impl Into<String>, window_length_days: u32) -> Self {
        CohortConfig {
            target_code: target_code.into(),
            window_length_days,
            control_index_policy: ControlIndexPolicy::LastEvent,
            include_index_day: true,
            min_events_in_window: 0,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.window_length_days < 1 {
            return Err(Error::ConfigKey {
                key: "window_length_days".into(),
                message: "must be at least 1".into(),
            });
        }
        if self.target_code.is_empty() {
            return Err(Error::ConfigKey {
                key: "target_code".into(),
                message: "must not be empty".into(),
            });
        }
        Ok(())
    }
}

/// Labels patients and fixes each member's observation window.
///
/// Positives are anchored at the first occurrence of the target code.
/// Controls are anchored per `control_index_policy`. Target-code events are
/// stripped from every member's record.
pub fn build_cohort(
    records: &BTreeMap<String, PatientRecord>,
    config: &CohortConfig,
) -> Result<Cohort> {
    config.validate()?;
    if records.is_empty() {
        return Err(Error::InvalidInput("no patient records".into()));
    }
    let length = Day::from(config.window_length_days);
    let mut members = Vec::new();
    for (id, record) in records {
        let first_target = record
            .events
            .iter()
            .find(|e| e.code == config.target_code)
            .map(|e| e.timestamp);
        let events: Vec<Event> = record
            .events
            .iter()
            .filter(|e| e.code != config.target_code)
            .cloned()
            .collect();
        let (label, index_day) = match first_target {
            Some(t) => (Label::Positive, t),
            None => {
                let anchor = match config.control_index_policy {
                    ControlIndexPolicy::LastEvent => events.last().map(|e| e.timestamp),
                    ControlIndexPolicy::RandomEvent if events.is_empty() => None,
                    ControlIndexPolicy::RandomEvent => {
                        let mut rng = seed::rng(seed::derive(&[config.seed, seed::hash_str(id)]));
                        Some(events[rng.gen_range(0..events.len())].timestamp)
                    }
                };
                match anchor {
                    Some(t) => (Label::Negative, t),
                    None => continue,
                }
            }
        };
        let t_end = if config.include_index_day {
            index_day
        } else {
            index_day - 1
        };
        let window = Window::new(index_day - length, t_end.max(index_day - length))?;
        let in_window = events.iter().filter(|e| window.contains(e.timestamp)).count();
        if in_window < config.min_events_in_window {
            continue;
        }
        members.push(CohortMember {
            record: PatientRecord::new(id.clone(), events),
            label,
            window,
        });
    }
    let cohort = Cohort {
        target_code: config.target_code.clone(),
        members,
    };
    cohort.check_learnable()?;
    Ok(cohort)
}
