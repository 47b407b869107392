//! Timestamp-indexed hourly series used for loads, generation profiles,
//! interface flows, fuel prices and reference LMPs.

use std::fmt::Write as _;

use chrono::{NaiveDateTime, Timelike};
use indexmap::IndexMap;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProfileError {
    #[error("profile has no rows")]
    Empty,
    #[error("timestamps not strictly increasing at {0}")]
    NonMonotonic(NaiveDateTime),
    #[error("timestamps not hourly spaced at {0}")]
    NotHourly(NaiveDateTime),
    #[error("column `{0}` has {1} values for {2} timestamps")]
    LengthMismatch(String, usize, usize),
    #[error("column `{0}` contains a non-finite value at {1}")]
    NonFinite(String, NaiveDateTime),
    #[error("unknown column `{0}`")]
    UnknownColumn(String),
}

/// Immutable hourly time series: a strictly increasing, gap-free hourly
/// index plus one or more named real-valued columns of equal length.
#[derive(Debug, Clone, PartialEq)]
pub struct HourlyProfile {
    index: Vec<NaiveDateTime>,
    columns: IndexMap<String, Vec<f64>>,
}

impl HourlyProfile {
    /// Builds a profile, enforcing the hourly-index and finite-value
    /// invariants.
    pub fn new(
        index: Vec<NaiveDateTime>,
        columns: IndexMap<String, Vec<f64>>,
    ) -> Result<Self, ProfileError> {
        if index.is_empty() {
            return Err(ProfileError::Empty);
        }
        for pair in index.windows(2) {
            let dt = pair[1] - pair[0];
            if dt <= chrono::Duration::zero() {
                return Err(ProfileError::NonMonotonic(pair[1]));
            }
            if dt != chrono::Duration::hours(1) {
                return Err(ProfileError::NotHourly(pair[1]));
            }
        }
        for (name, vals) in &columns {
            if vals.len() != index.len() {
                return Err(ProfileError::LengthMismatch(
                    name.clone(),
                    vals.len(),
                    index.len(),
                ));
            }
            if let Some(i) = vals.iter().position(|v| !v.is_finite()) {
                return Err(ProfileError::NonFinite(name.clone(), index[i]));
            }
        }
        Ok(HourlyProfile { index, columns })
    }

    pub fn len(&self) -> usize {
        self.index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index.is_empty()
    }

    pub fn index(&self) -> &[NaiveDateTime] {
        &self.index
    }

    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.columns.get(name).map(|v| v.as_slice())
    }

    pub fn require_column(&self, name: &str) -> Result<&[f64], ProfileError> {
        self.column(name)
            .ok_or_else(|| ProfileError::UnknownColumn(name.to_string()))
    }

    pub fn column_names(&self) -> impl Iterator<Item = &str> {
        self.columns.keys().map(|s| s.as_str())
    }

    pub fn columns(&self) -> impl Iterator<Item = (&str, &[f64])> {
        self.columns.iter().map(|(k, v)| (k.as_str(), v.as_slice()))
    }

    pub fn has_column(&self, name: &str) -> bool {
        self.columns.contains_key(name)
    }

    /// Position of the given timestamp in the index.
    pub fn position(&self, ts: NaiveDateTime) -> Option<usize> {
        self.index.binary_search(&ts).ok()
    }

    /// Calendar month (1..=12) of each hour.
    pub fn months(&self) -> Vec<u32> {
        use chrono::Datelike;
        self.index.iter().map(|t| t.month()).collect()
    }

    /// Hour of day (0..=23) of each timestamp.
    pub fn hours_of_day(&self) -> Vec<u32> {
        self.index.iter().map(|t| t.time().hour()).collect()
    }

    /// Sub-profile covering index positions `start..=end` (inclusive).
    pub fn slice(&self, start: usize, end: usize) -> Option<HourlyProfile> {
        if start > end || end >= self.len() {
            return None;
        }
        let index = self.index[start..=end].to_vec();
        let columns = self
            .columns
            .iter()
            .map(|(k, v)| (k.clone(), v[start..=end].to_vec()))
            .collect();
        Some(HourlyProfile { index, columns })
    }

    /// Renders the profile as CSV with a `timestamp` first column, columns
    /// in insertion order and shortest-round-trip float formatting.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::new();
        out.push_str("timestamp");
        for name in self.columns.keys() {
            out.push(',');
            out.push_str(name);
        }
        out.push('\n');
        for (i, ts) in self.index.iter().enumerate() {
            let _ = write!(out, "{}", ts.format("%Y-%m-%dT%H:%M:%S"));
            for vals in self.columns.values() {
                let _ = write!(out, ",{}", vals[i]);
            }
            out.push('\n');
        }
        out
    }
}
