//! Output panels: sparse location x activity x year tensors of nonnegative
//! output values (export USD or payroll USD), plus the auxiliary macro series
//! used by filters and the growth model.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Processing state of a panel. Operations check this so that, for example,
/// filters cannot silently run on unsmoothed data.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Provenance {
    Raw,
    Smoothed,
    Filtered,
}

impl Provenance {
    pub fn as_str(self) -> &'static str {
        match self {
            Provenance::Raw => "raw",
            Provenance::Smoothed => "smoothed",
            Provenance::Filtered => "filtered",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "raw" => Some(Provenance::Raw),
            "smoothed" => Some(Provenance::Smoothed),
            "filtered" => Some(Provenance::Filtered),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PanelEntry<T> {
    pub location: String,
    pub activity: String,
    pub year: i32,
    pub value: T,
}

/// Sparse output tensor with stable, sorted id indices.
///
/// Entries are kept sorted by `(location, activity, year)` and deduplicated;
/// the persistence format round-trips byte-for-byte because of that ordering.
#[derive(Clone, Debug, PartialEq)]
pub struct OutputPanel<T> {
    entries: Vec<PanelEntry<T>>,
    location_index: Vec<String>,
    activity_index: Vec<String>,
    years: Option<(i32, i32)>,
    provenance: Provenance,
    smoothing_window: Option<u32>,
}

impl<T: Scalar> OutputPanel<T> {
    /// Builds a panel, sorting entries and validating the type invariants:
    /// no duplicate keys, no negative values, ids free of control characters.
    pub fn from_entries(
        mut entries: Vec<PanelEntry<T>>,
        provenance: Provenance,
        smoothing_window: Option<u32>,
        years: Option<(i32, i32)>,
    ) -> Result<Self> {
        entries.sort_by(|a, b| {
            (&a.location, &a.activity, a.year).cmp(&(&b.location, &b.activity, b.year))
        });
        for pair in entries.windows(2) {
            if pair[0].location == pair[1].location
                && pair[0].activity == pair[1].activity
                && pair[0].year == pair[1].year
            {
                return Err(Error::DuplicateKey {
                    location: pair[0].location.clone(),
                    activity: pair[0].activity.clone(),
                    year: pair[0].year,
                });
            }
        }
        let mut locations = Vec::new();
        let mut activities = Vec::new();
        for e in &entries {
            if e.value < T::zero() || !e.value.is_finite() {
                return Err(Error::NegativeValue {
                    location: e.location.clone(),
                    activity: e.activity.clone(),
                    year: e.year,
                });
            }
            validate_id(&e.location)?;
            validate_id(&e.activity)?;
            locations.push(e.location.clone());
            activities.push(e.activity.clone());
        }
        locations.sort();
        locations.dedup();
        activities.sort();
        activities.dedup();

        let derived = entries
            .iter()
            .map(|e| e.year)
            .fold(None, |acc: Option<(i32, i32)>, y| match acc {
                None => Some((y, y)),
                Some((lo, hi)) => Some((lo.min(y), hi.max(y))),
            });
        let years = match (years, derived) {
            (Some((lo, hi)), Some((dlo, dhi))) => {
                if dlo < lo || dhi > hi {
                    return Err(Error::Config(format!(
                        "entries span {dlo}..{dhi}, outside declared years {lo}..{hi}"
                    )));
                }
                Some((lo, hi))
            }
            (Some(range), None) => Some(range),
            (None, derived) => derived,
        };

        Ok(Self {
            entries,
            location_index: locations,
            activity_index: activities,
            years,
            provenance,
            smoothing_window,
        })
    }

    pub fn entries(&self) -> &[PanelEntry<T>] {
        &self.entries
    }

    pub fn location_index(&self) -> &[String] {
        &self.location_index
    }

    pub fn activity_index(&self) -> &[String] {
        &self.activity_index
    }

    /// `(first, last)` year covered by the panel metadata, inclusive.
    pub fn years(&self) -> Option<(i32, i32)> {
        self.years
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn smoothing_window(&self) -> Option<u32> {
        self.smoothing_window
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Entries for one year, in `(location, activity)` order.
    pub fn year_slice(&self, year: i32) -> impl Iterator<Item = &PanelEntry<T>> {
        self.entries.iter().filter(move |e| e.year == year)
    }

    /// Distinct years that actually carry entries, ascending.
    pub fn years_present(&self) -> Vec<i32> {
        let mut years: Vec<i32> = self.entries.iter().map(|e| e.year).collect();
        years.sort_unstable();
        years.dedup();
        years
    }
}

fn validate_id(id: &str) -> Result<()> {
    if id.is_empty() {
        return Err(Error::InvalidId {
            id: id.to_string(),
            reason: "empty id".to_string(),
        });
    }
    if id.chars().any(|c| c == '\t' || c == '\n' || c == '\r') {
        return Err(Error::InvalidId {
            id: id.to_string(),
            reason: "ids may not contain tabs or newlines".to_string(),
        });
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq)]
pub struct MacroRow<T> {
    pub location: String,
    pub year: i32,
    /// GDP per capita, PPP, constant-2021 USD.
    pub gdp_pc_ppp: T,
    pub population: T,
}

/// Per-location, per-year GDP-per-capita and population series.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct MacroSeries<T> {
    rows: BTreeMap<(String, i32), MacroRow<T>>,
}

impl<T: Scalar> MacroSeries<T> {
    pub fn from_rows(rows: Vec<MacroRow<T>>) -> Result<Self> {
        let mut map = BTreeMap::new();
        for row in rows {
            if row.gdp_pc_ppp <= T::zero() || !row.gdp_pc_ppp.is_finite() {
                return Err(Error::MacroInvalid {
                    location: row.location,
                    year: row.year,
                    msg: "gdp_pc_ppp must be positive".to_string(),
                });
            }
            if row.population <= T::zero() || !row.population.is_finite() {
                return Err(Error::MacroInvalid {
                    location: row.location,
                    year: row.year,
                    msg: "population must be positive".to_string(),
                });
            }
            let key = (row.location.clone(), row.year);
            if map.contains_key(&key) {
                return Err(Error::MacroInvalid {
                    location: row.location,
                    year: row.year,
                    msg: "duplicate (location, year)".to_string(),
                });
            }
            map.insert(key, row);
        }
        Ok(Self { rows: map })
    }

    pub fn get(&self, location: &str, year: i32) -> Option<&MacroRow<T>> {
        self.rows.get(&(location.to_string(), year))
    }

    pub fn iter(&self) -> impl Iterator<Item = &MacroRow<T>> {
        self.rows.values()
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

/// Output-volume and population thresholds applied per year.
///
/// Location totals must strictly exceed `min_location_total` (and population
/// `min_population`, when set and a macro series is available); activities are
/// dropped when their total falls strictly below `min_activity_total`.
#[derive(Clone, Copy, Debug, PartialEq, Deserialize, Serialize)]
pub struct FilterRules<T> {
    pub min_location_total: T,
    #[serde(default)]
    pub min_population: Option<T>,
    pub min_activity_total: T,
}

impl<T: Scalar> FilterRules<T> {
    /// No-op rules: nothing is filtered.
    pub fn none() -> Self {
        Self {
            min_location_total: T::zero(),
            min_population: None,
            min_activity_total: T::zero(),
        }
    }

    /// Trade thresholds reported with the source data: USD 1B exports,
    /// 1M population, USD 500k product totals.
    pub fn trade_defaults() -> Self {
        Self {
            min_location_total: crate::scalar::lit(1e9),
            min_population: Some(crate::scalar::lit(1e6)),
            min_activity_total: crate::scalar::lit(5e5),
        }
    }

    /// Payroll thresholds: USD 100k per metro area, USD 150k per industry,
    /// no population rule.
    pub fn payroll_defaults() -> Self {
        Self {
            min_location_total: crate::scalar::lit(1e5),
            min_population: None,
            min_activity_total: crate::scalar::lit(1.5e5),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn entry(l: &str, a: &str, y: i32, v: f64) -> PanelEntry<f64> {
        PanelEntry {
            location: l.to_string(),
            activity: a.to_string(),
            year: y,
            value: v,
        }
    }

    #[test]
    fn entries_are_sorted_and_indexed() {
        let panel = OutputPanel::from_entries(
            vec![
                entry("B", "y", 2001, 2.0),
                entry("A", "x", 2000, 1.0),
                entry("A", "y", 2001, 3.0),
            ],
            Provenance::Raw,
            None,
            None,
        )
        .unwrap();
        assert_eq!(panel.location_index(), &["A".to_string(), "B".to_string()]);
        assert_eq!(panel.activity_index(), &["x".to_string(), "y".to_string()]);
        assert_eq!(panel.years(), Some((2000, 2001)));
        assert_eq!(panel.entries()[0].location, "A");
    }

    #[test]
    fn duplicate_key_is_rejected() {
        let err = OutputPanel::from_entries(
            vec![entry("A", "x", 2000, 1.0), entry("A", "x", 2000, 2.0)],
            Provenance::Raw,
            None,
            None,
        )
        .unwrap_err();
        assert!(matches!(err, Error::DuplicateKey { .. }));
    }

    #[test]
    fn negative_value_is_rejected() {
        let err = OutputPanel::from_entries(
            vec![entry("A", "x", 2000, -5.0)],
            Provenance::Raw,
            None,
            None,
        )
        .unwrap_err();
        assert!(matches!(err, Error::NegativeValue { .. }));
    }

    #[test]
    fn macro_series_rejects_nonpositive_population() {
        let err = MacroSeries::from_rows(vec![MacroRow {
            location: "A".to_string(),
            year: 2000,
            gdp_pc_ppp: 1000.0,
            population: 0.0,
        }])
        .unwrap_err();
        assert!(matches!(err, Error::MacroInvalid { .. }));
    }
}
