//! Domain types for timestamped medical events, patient records, windows and
//! labelled cohorts.
//!
//! Time is measured in integer day indices relative to an arbitrary epoch.
//! Windows are inclusive at both ends.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Day index relative to a dataset epoch.
pub type Day = i64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    /// Continuous lab measurement (NPU code), carries a value.
    Lab,
    /// Drug prescription (ATC code).
    Drug,
    /// Diagnosis (ICD-10 code).
    Diagnosis,
}

impl EventKind {
    pub fn is_categorical(self) -> bool {
        !matches!(self, EventKind::Lab)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub code: String,
    pub kind: EventKind,
    pub value: Option<f64>,
    pub timestamp: Day,
}

impl Event {
    pub fn lab(code: impl Into<String>, value: f64, timestamp: Day) -> Self {
        Event {
            code: code.into(),
            kind: EventKind::Lab,
            value: Some(value),
            timestamp,
        }
    }

    pub fn drug(code: impl Into<String>, timestamp: Day) -> Self {
        Event {
            code: code.into(),
            kind: EventKind::Drug,
            value: None,
            timestamp,
        }
    }

    pub fn diagnosis(code: impl Into<String>, timestamp: Day) -> Self {
        Event {
            code: code.into(),
            kind: EventKind::Diagnosis,
            value: None,
            timestamp,
        }
    }
}

/// One patient's event history.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatientRecord {
    pub patient_id: String,
    pub events: Vec<Event>,
}

impl PatientRecord {
    /// Wraps events as given. Use [`validate_record`] to check ordering.
    pub fn new(patient_id: impl Into<String>, events: Vec<Event>) -> Self {
        PatientRecord {
            patient_id: patient_id.into(),
            events,
        }
    }

    /// Sorts events by timestamp, keeping input order among ties.
    pub fn from_unsorted(patient_id: impl Into<String>, mut events: Vec<Event>) -> Self {
        events.sort_by_key(|e| e.timestamp);
        Self::new(patient_id, events)
    }

    pub fn last_timestamp(&self) -> Option<Day> {
        self.events.last().map(|e| e.timestamp)
    }
}

/// Inclusive day range `[t_start, t_end]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Window {
    t_start: Day,
    t_end: Day,
}

impl Window {
    pub fn new(t_start: Day, t_end: Day) -> Result<Self> {
        if t_start > t_end {
            return Err(Error::InvalidInput(format!(
                "window start {t_start} is after end {t_end}"
            )));
        }
        Ok(Window { t_start, t_end })
    }

    /// The window of `length` days ending at `t_end`.
    pub fn ending_at(t_end: Day, length: Day) -> Result<Self> {
        Self::new(t_end - length, t_end)
    }

    pub fn t_start(&self) -> Day {
        self.t_start
    }

    pub fn t_end(&self) -> Day {
        self.t_end
    }

    pub fn span(&self) -> Day {
        self.t_end - self.t_start
    }

    pub fn contains(&self, t: Day) -> bool {
        self.t_start <= t && t <= self.t_end
    }
}

impl fmt::Display for Window {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}]", self.t_start, self.t_end)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    Positive,
    Negative,
}

impl Label {
    pub fn is_positive(self) -> bool {
        self == Label::Positive
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohortMember {
    /// Events with every target-code occurrence already removed.
    pub record: PatientRecord,
    pub label: Label,
    pub window: Window,
}

/// Labelled patients for one studied adverse drug event.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cohort {
    pub target_code: String,
    pub members: Vec<CohortMember>,
}

impl Cohort {
    pub fn n_positive(&self) -> usize {
        self.members.iter().filter(|m| m.label.is_positive()).count()
    }

    pub fn n_negative(&self) -> usize {
        self.members.len() - self.n_positive()
    }

    /// Fails unless both classes are represented.
    pub fn check_learnable(&self) -> Result<()> {
        let (positives, negatives) = (self.n_positive(), self.n_negative());
        if positives == 0 || negatives == 0 {
            return Err(Error::DegenerateCohort {
                positives,
                negatives,
            });
        }
        Ok(())
    }
}

/// Events of `record` that fall inside `window`, in record order.
pub fn slice_window(record: &PatientRecord, window: Window) -> Vec<Event> {
    record
        .events
        .iter()
        .filter(|e| window.contains(e.timestamp))
        .cloned()
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ViolationKind {
    Unsorted,
    MissingLabValue,
    ValueOnCategorical,
    NonFiniteValue,
}

impl fmt::Display for ViolationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ViolationKind::Unsorted => "unsorted",
            ViolationKind::MissingLabValue => "missing value on lab event",
            ViolationKind::ValueOnCategorical => "value on categorical event",
            ViolationKind::NonFiniteValue => "non-finite value",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub index: usize,
    pub kind: ViolationKind,
}

/// Lists every invariant violation in `record`. An empty list means the
/// record is well formed.
pub fn validate_record(record: &PatientRecord) -> Vec<Violation> {
    let mut out = Vec::new();
    for (index, event) in record.events.iter().enumerate() {
        if index > 0 && event.timestamp < record.events[index - 1].timestamp {
            out.push(Violation {
                index,
                kind: ViolationKind::Unsorted,
            });
        }
        match (event.kind, event.value) {
            (EventKind::Lab, None) => out.push(Violation {
                index,
                kind: ViolationKind::MissingLabValue,
            }),
            (EventKind::Lab, Some(v)) if !v.is_finite() => out.push(Violation {
                index,
                kind: ViolationKind::NonFiniteValue,
            }),
            (EventKind::Drug | EventKind::Diagnosis, Some(_)) => out.push(Violation {
                index,
                kind: ViolationKind::ValueOnCategorical,
            }),
            _ => {}
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn at(days: &[Day]) -> PatientRecord {
        PatientRecord::new(
            "p",
            days.iter()
                .enumerate()
                .map(|(i, &d)| Event::drug(format!("C{i}"), d))
                .collect(),
        )
    }

    fn days(events: &[Event]) -> Vec<Day> {
        events.iter().map(|e| e.timestamp).collect()
    }

    #[test]
    fn slice_keeps_inclusive_range() {
        let r = at(&[2, 5, 11]);
        let s = slice_window(&r, Window::new(0, 10).unwrap());
        assert_eq!(days(&s), vec![2, 5]);
    }

    #[test]
    fn slice_of_point_window_without_event_is_empty() {
        let r = at(&[2, 5, 11]);
        assert!(slice_window(&r, Window::new(3, 3).unwrap()).is_empty());
    }

    #[test]
    fn slice_preserves_tie_order() {
        let r = at(&[3, 3, 7]);
        let s = slice_window(&r, Window::new(3, 7).unwrap());
        let codes: Vec<_> = s.iter().map(|e| e.code.as_str()).collect();
        assert_eq!(codes, vec!["C0", "C1", "C2"]);
    }

    #[test]
    fn window_rejects_reversed_bounds() {
        assert!(Window::new(5, 4).is_err());
        assert_eq!(Window::ending_at(40, 30).unwrap(), Window::new(10, 40).unwrap());
    }

    #[test]
    fn validate_accepts_well_formed() {
        let r = PatientRecord::new(
            "p",
            vec![Event::lab("NPU1", 1.0, 0), Event::drug("A", 1), Event::diagnosis("D", 1)],
        );
        assert!(validate_record(&r).is_empty());
    }

    #[test]
    fn validate_flags_value_on_drug() {
        let mut drug = Event::drug("A04AA01", 4);
        drug.value = Some(3.2);
        let r = PatientRecord::new("p", vec![Event::lab("L", 1.0, 1), drug]);
        assert_eq!(
            validate_record(&r),
            vec![Violation {
                index: 1,
                kind: ViolationKind::ValueOnCategorical
            }]
        );
        assert_eq!(ViolationKind::ValueOnCategorical.to_string(), "value on categorical event");
    }

    #[test]
    fn validate_flags_unsorted_and_non_finite() {
        let r = PatientRecord::new("p", vec![Event::lab("L", f64::NAN, 5), Event::drug("A", 2)]);
        let v = validate_record(&r);
        assert!(v.contains(&Violation {
            index: 0,
            kind: ViolationKind::NonFiniteValue
        }));
        assert!(v.contains(&Violation {
            index: 1,
            kind: ViolationKind::Unsorted
        }));
    }

    proptest! {
        #[test]
        fn slice_is_idempotent_and_partitions(
            mut ds in proptest::collection::vec(-20i64..40, 0..30),
            a in -25i64..10, len1 in 0i64..20, len2 in 1i64..20,
        ) {
            ds.sort();
            let r = at(&ds);
            let b = a + len1;
            let c = b + len2;
            let w = Window::new(a, c).unwrap();
            let whole = slice_window(&r, w);
            prop_assert!(whole.len() <= r.events.len());
            let again = slice_window(&PatientRecord::new("p", whole.clone()), w);
            prop_assert_eq!(&again, &whole);
            let mut left = slice_window(&r, Window::new(a, b).unwrap());
            let right = slice_window(&r, Window::new(b + 1, c).unwrap());
            left.extend(right);
            prop_assert_eq!(left, whole);
        }
    }
}
