//! Loading, smoothing, filtering and persisting output panels.
//!
//! Raw CSVs come in two schemas (trade and payroll) plus a macro series for
//! GDP per capita and population. Smoothing replaces each value with a
//! trailing moving average; filtering applies per-year volume and population
//! thresholds. Panels persist in a versioned, sorted, tab-separated format
//! whose round trip is byte-stable.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::panel::{FilterRules, MacroRow, MacroSeries, OutputPanel, PanelEntry, Provenance};
use crate::scalar::{lit, to_f64, Scalar};

/// Input CSV schema for [`load_panel_csv`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PanelSchema {
    /// `country_id,product_hs4,year,export_value`
    Trade,
    /// `msa_id,naics,year,payroll`
    Payroll,
}

impl PanelSchema {
    pub fn header(self) -> &'static str {
        match self {
            PanelSchema::Trade => "country_id,product_hs4,year,export_value",
            PanelSchema::Payroll => "msa_id,naics,year,payroll",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "trade" => Some(PanelSchema::Trade),
            "payroll" => Some(PanelSchema::Payroll),
            _ => None,
        }
    }

    /// Paper-reported filter thresholds for this data source.
    pub fn default_rules<T: Scalar>(self) -> FilterRules<T> {
        match self {
            PanelSchema::Trade => FilterRules::trade_defaults(),
            PanelSchema::Payroll => FilterRules::payroll_defaults(),
        }
    }
}

const MACRO_HEADER: &str = "country_id,year,gdp_pc_ppp_const2021,population";

/// Loads a raw panel CSV, rejecting malformed rows with their line number.
pub fn load_panel_csv<T: Scalar>(path: &Path, schema: PanelSchema) -> Result<OutputPanel<T>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| csv_open_error(path, e))?;

    let headers = reader
        .headers()
        .map_err(|e| csv_open_error(path, e))?
        .iter()
        .collect::<Vec<_>>()
        .join(",");
    if headers != schema.header() {
        return Err(Error::CsvHeader {
            path: path.to_path_buf(),
            expected: schema.header().to_string(),
            found: headers,
        });
    }

    let mut entries = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| csv_open_error(path, e))?;
        let line = record.position().map_or(0, |p| p.line());
        let field = |idx: usize, name: &str| -> Result<&str> {
            record.get(idx).map(str::trim).ok_or_else(|| Error::MalformedRow {
                path: path.to_path_buf(),
                line,
                msg: format!("missing field {name}"),
            })
        };
        let location = field(0, "location")?.to_string();
        let activity = field(1, "activity")?.to_string();
        let year = parse_field::<i32>(path, line, field(2, "year")?, "year")?;
        let raw_value = parse_field::<f64>(path, line, field(3, "value")?, "value")?;
        if raw_value < 0.0 || !raw_value.is_finite() {
            return Err(Error::MalformedRow {
                path: path.to_path_buf(),
                line,
                msg: format!("negative or non-finite value {raw_value}"),
            });
        }
        entries.push(PanelEntry {
            location,
            activity,
            year,
            value: lit::<T>(raw_value),
        });
    }
    if entries.is_empty() {
        return Err(Error::EmptyInput {
            path: path.to_path_buf(),
        });
    }
    OutputPanel::from_entries(entries, Provenance::Raw, None, None)
}

/// Loads the macro CSV (`country_id,year,gdp_pc_ppp_const2021,population`).
pub fn load_macro_csv<T: Scalar>(path: &Path) -> Result<MacroSeries<T>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| csv_open_error(path, e))?;
    let headers = reader
        .headers()
        .map_err(|e| csv_open_error(path, e))?
        .iter()
        .collect::<Vec<_>>()
        .join(",");
    if headers != MACRO_HEADER {
        return Err(Error::CsvHeader {
            path: path.to_path_buf(),
            expected: MACRO_HEADER.to_string(),
            found: headers,
        });
    }
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| csv_open_error(path, e))?;
        let line = record.position().map_or(0, |p| p.line());
        let get = |idx: usize, name: &str| -> Result<&str> {
            record.get(idx).map(str::trim).ok_or_else(|| Error::MalformedRow {
                path: path.to_path_buf(),
                line,
                msg: format!("missing field {name}"),
            })
        };
        rows.push(MacroRow {
            location: get(0, "location")?.to_string(),
            year: parse_field::<i32>(path, line, get(1, "year")?, "year")?,
            gdp_pc_ppp: lit(parse_field::<f64>(path, line, get(2, "gdp_pc_ppp")?, "gdp_pc_ppp")?),
            population: lit(parse_field::<f64>(path, line, get(3, "population")?, "population")?),
        });
    }
    if rows.is_empty() {
        return Err(Error::EmptyInput {
            path: path.to_path_buf(),
        });
    }
    MacroSeries::from_rows(rows)
}

fn parse_field<V: std::str::FromStr>(path: &Path, line: u64, s: &str, name: &str) -> Result<V> {
    s.parse().map_err(|_| Error::MalformedRow {
        path: path.to_path_buf(),
        line,
        msg: format!("cannot parse {name} from {s:?}"),
    })
}

fn csv_open_error(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Corrupt {
            path: path.to_path_buf(),
            msg: format!("{other:?}"),
        },
    }
}

/// Trailing moving average over `window` years.
///
/// A cell's smoothed value at year `y` is the mean of its raw values over
/// `[y - window + 1, y]`, counting absent cells as zero; only years with a
/// complete window are kept, so a window of 4 on 1998-2022 yields 2001-2022.
pub fn smooth_moving_average<T: Scalar>(
    panel: &OutputPanel<T>,
    window: u32,
) -> Result<OutputPanel<T>> {
    if panel.provenance() != Provenance::Raw {
        return Err(Error::WrongProvenance {
            expected: "raw".to_string(),
            found: panel.provenance().as_str().to_string(),
        });
    }
    if window == 0 {
        return Err(Error::Config("smoothing window must be at least 1".to_string()));
    }
    let (lo, hi) = panel.years().ok_or(Error::WindowTooLarge { window, span: 0 })?;
    let span = (hi - lo + 1) as u32;
    if window > span {
        return Err(Error::WindowTooLarge { window, span });
    }

    let w = window as usize;
    let n_years = span as usize;
    let first_out = lo + window as i32 - 1;
    let divisor: T = lit(window as f64);

    let mut smoothed = Vec::new();
    let entries = panel.entries();
    let mut group_start = 0;
    while group_start < entries.len() {
        let loc = &entries[group_start].location;
        let act = &entries[group_start].activity;
        let mut group_end = group_start;
        while group_end < entries.len()
            && entries[group_end].location == *loc
            && entries[group_end].activity == *act
        {
            group_end += 1;
        }

        let mut series = vec![T::zero(); n_years];
        for e in &entries[group_start..group_end] {
            series[(e.year - lo) as usize] = e.value;
        }
        let mut prefix = vec![T::zero(); n_years + 1];
        for (i, v) in series.iter().enumerate() {
            prefix[i + 1] = prefix[i] + *v;
        }
        for out in (w - 1)..n_years {
            let sum = prefix[out + 1] - prefix[out + 1 - w];
            let mean = sum / divisor;
            if mean > T::zero() {
                smoothed.push(PanelEntry {
                    location: loc.clone(),
                    activity: act.clone(),
                    year: lo + out as i32,
                    value: mean,
                });
            }
        }
        group_start = group_end;
    }

    OutputPanel::from_entries(
        smoothed,
        Provenance::Smoothed,
        Some(window),
        Some((first_out, hi)),
    )
}

/// Applies per-year location and activity thresholds.
///
/// Within each year, locations failing the output-total (and, when active,
/// population) thresholds are dropped first, then activities whose remaining
/// total falls below the activity threshold; the two steps repeat until the
/// year is stable, so a second application changes nothing. The population
/// rule is active only when both `min_population` is set and a macro series
/// is supplied.
pub fn apply_filters<T: Scalar>(
    panel: &OutputPanel<T>,
    macro_series: Option<&MacroSeries<T>>,
    rules: &FilterRules<T>,
) -> Result<OutputPanel<T>> {
    if panel.provenance() == Provenance::Raw {
        return Err(Error::WrongProvenance {
            expected: "smoothed".to_string(),
            found: "raw".to_string(),
        });
    }
    let population_rule = match (rules.min_population, macro_series) {
        (Some(min_pop), Some(series)) => Some((min_pop, series)),
        _ => None,
    };

    let mut kept = Vec::new();
    for year in panel.years_present() {
        let year_entries: Vec<&PanelEntry<T>> = panel.year_slice(year).collect();
        let mut alive_locations: std::collections::BTreeSet<&str> =
            year_entries.iter().map(|e| e.location.as_str()).collect();
        let mut alive_activities: std::collections::BTreeSet<&str> =
            year_entries.iter().map(|e| e.activity.as_str()).collect();

        loop {
            let mut changed = false;

            let mut location_totals: std::collections::BTreeMap<&str, T> =
                std::collections::BTreeMap::new();
            for e in &year_entries {
                if alive_locations.contains(e.location.as_str())
                    && alive_activities.contains(e.activity.as_str())
                {
                    *location_totals.entry(e.location.as_str()).or_insert(T::zero()) += e.value;
                }
            }
            let mut dropped: Vec<&str> = Vec::new();
            for loc in alive_locations.iter() {
                let total = location_totals.get(loc).copied().unwrap_or(T::zero());
                if total <= rules.min_location_total && rules.min_location_total > T::zero() {
                    dropped.push(loc);
                    continue;
                }
                if let Some((min_pop, series)) = population_rule {
                    let row = series.get(loc, year).ok_or_else(|| Error::MissingMacro {
                        location: loc.to_string(),
                        year,
                    })?;
                    if row.population <= min_pop {
                        dropped.push(loc);
                    }
                }
            }
            for loc in dropped {
                alive_locations.remove(loc);
                changed = true;
            }

            let mut activity_totals: std::collections::BTreeMap<&str, T> =
                std::collections::BTreeMap::new();
            for e in &year_entries {
                if alive_locations.contains(e.location.as_str())
                    && alive_activities.contains(e.activity.as_str())
                {
                    *activity_totals.entry(e.activity.as_str()).or_insert(T::zero()) += e.value;
                }
            }
            let dropped: Vec<&str> = alive_activities
                .iter()
                .filter(|act| {
                    activity_totals.get(*act).copied().unwrap_or(T::zero())
                        < rules.min_activity_total
                })
                .copied()
                .collect();
            for act in dropped {
                alive_activities.remove(act);
                changed = true;
            }

            if !changed {
                break;
            }
        }

        for e in year_entries {
            if alive_locations.contains(e.location.as_str())
                && alive_activities.contains(e.activity.as_str())
            {
                kept.push(e.clone());
            }
        }
    }

    OutputPanel::from_entries(
        kept,
        Provenance::Filtered,
        panel.smoothing_window(),
        panel.years(),
    )
}

const PANEL_FORMAT_VERSION: u32 = 1;

/// Serializes a panel in the versioned tab-separated format.
pub fn panel_to_string<T: Scalar>(panel: &OutputPanel<T>) -> String {
    let mut out = String::new();
    out.push_str(&format!("eciopt-panel {PANEL_FORMAT_VERSION}\n"));
    out.push_str(&format!("provenance {}\n", panel.provenance().as_str()));
    if let Some(w) = panel.smoothing_window() {
        out.push_str(&format!("window {w}\n"));
    }
    match panel.years() {
        Some((lo, hi)) => out.push_str(&format!("years {lo} {hi}\n")),
        None => out.push_str("years none\n"),
    }
    out.push_str(&format!("entries {}\n", panel.len()));
    for e in panel.entries() {
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\n",
            e.location,
            e.activity,
            e.year,
            to_f64(e.value)
        ));
    }
    out
}

pub fn save_panel<T: Scalar>(panel: &OutputPanel<T>, path: &Path) -> Result<()> {
    fs::write(path, panel_to_string(panel)).map_err(|e| Error::io(path, e))
}

pub fn load_saved_panel<T: Scalar>(path: &Path) -> Result<OutputPanel<T>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_saved_panel(&text, path)
}

fn parse_saved_panel<T: Scalar>(text: &str, path: &Path) -> Result<OutputPanel<T>> {
    let corrupt = |msg: &str| Error::Corrupt {
        path: path.to_path_buf(),
        msg: msg.to_string(),
    };
    let mut lines = text.lines();

    let magic = lines.next().ok_or_else(|| corrupt("empty file"))?;
    let version = magic
        .strip_prefix("eciopt-panel ")
        .ok_or_else(|| corrupt("missing panel magic line"))?;
    if version != PANEL_FORMAT_VERSION.to_string() {
        return Err(Error::FormatVersion {
            path: path.to_path_buf(),
            found: version.to_string(),
        });
    }

    let prov_line = lines.next().ok_or_else(|| corrupt("missing provenance line"))?;
    let provenance = prov_line
        .strip_prefix("provenance ")
        .and_then(Provenance::parse)
        .ok_or_else(|| corrupt("bad provenance line"))?;

    let mut line = lines.next().ok_or_else(|| corrupt("missing years line"))?;
    let mut window = None;
    if let Some(w) = line.strip_prefix("window ") {
        window = Some(w.parse::<u32>().map_err(|_| corrupt("bad window line"))?);
        line = lines.next().ok_or_else(|| corrupt("missing years line"))?;
    }

    let years_spec = line
        .strip_prefix("years ")
        .ok_or_else(|| corrupt("bad years line"))?;
    let years = if years_spec == "none" {
        None
    } else {
        let mut parts = years_spec.split(' ');
        let lo = parts
            .next()
            .and_then(|s| s.parse::<i32>().ok())
            .ok_or_else(|| corrupt("bad years line"))?;
        let hi = parts
            .next()
            .and_then(|s| s.parse::<i32>().ok())
            .ok_or_else(|| corrupt("bad years line"))?;
        if parts.next().is_some() {
            return Err(corrupt("bad years line"));
        }
        Some((lo, hi))
    };

    let count_line = lines.next().ok_or_else(|| corrupt("missing entries line"))?;
    let declared: usize = count_line
        .strip_prefix("entries ")
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| corrupt("bad entries line"))?;

    let mut entries = Vec::with_capacity(declared);
    for raw in lines.by_ref().take(declared) {
        let mut fields = raw.split('\t');
        let location = fields.next().ok_or_else(|| corrupt("short entry row"))?;
        let activity = fields.next().ok_or_else(|| corrupt("short entry row"))?;
        let year = fields
            .next()
            .and_then(|s| s.parse::<i32>().ok())
            .ok_or_else(|| corrupt("bad year in entry row"))?;
        let value = fields
            .next()
            .and_then(|s| s.parse::<f64>().ok())
            .ok_or_else(|| corrupt("bad value in entry row"))?;
        if fields.next().is_some() {
            return Err(corrupt("extra fields in entry row"));
        }
        entries.push(PanelEntry {
            location: location.to_string(),
            activity: activity.to_string(),
            year,
            value: lit::<T>(value),
        });
    }
    if entries.len() != declared {
        return Err(corrupt(&format!(
            "declared {declared} entries but found {}; file truncated?",
            entries.len()
        )));
    }
    if lines.next().is_some() {
        return Err(corrupt("trailing content after declared entries"));
    }

    OutputPanel::from_entries(entries, provenance, window, years)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn entry(l: &str, a: &str, y: i32, v: f64) -> PanelEntry<f64> {
        PanelEntry {
            location: l.to_string(),
            activity: a.to_string(),
            year: y,
            value: v,
        }
    }

    fn write_temp(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    #[test]
    fn loads_well_formed_trade_csv() {
        let f = write_temp(
            "country_id,product_hs4,year,export_value\nVNM,8532,2020,100.5\nVNM,8477,2020,3.25\nTHA,8532,2021,7\n",
        );
        let panel: OutputPanel<f64> = load_panel_csv(f.path(), PanelSchema::Trade).unwrap();
        assert_eq!(panel.len(), 3);
        assert!(panel.location_index().len() <= 3);
        assert!(panel.activity_index().len() <= 3);
        assert_eq!(panel.provenance(), Provenance::Raw);
    }

    #[test]
    fn negative_value_names_the_line() {
        let f = write_temp(
            "country_id,product_hs4,year,export_value\nVNM,8532,2020,10\nVNM,8477,2020,-5\n",
        );
        let err = load_panel_csv::<f64>(f.path(), PanelSchema::Trade).unwrap_err();
        match err {
            Error::MalformedRow { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn empty_file_and_bad_header_are_rejected() {
        let empty = write_temp("country_id,product_hs4,year,export_value\n");
        assert!(matches!(
            load_panel_csv::<f64>(empty.path(), PanelSchema::Trade),
            Err(Error::EmptyInput { .. })
        ));
        let bad = write_temp("a,b,c,d\n1,2,3,4\n");
        assert!(matches!(
            load_panel_csv::<f64>(bad.path(), PanelSchema::Trade),
            Err(Error::CsvHeader { .. })
        ));
    }

    #[test]
    fn duplicate_key_is_reported() {
        let f = write_temp(
            "country_id,product_hs4,year,export_value\nVNM,8532,2020,10\nVNM,8532,2020,11\n",
        );
        assert!(matches!(
            load_panel_csv::<f64>(f.path(), PanelSchema::Trade),
            Err(Error::DuplicateKey { .. })
        ));
    }

    fn raw_panel(entries: Vec<PanelEntry<f64>>) -> OutputPanel<f64> {
        OutputPanel::from_entries(entries, Provenance::Raw, None, None).unwrap()
    }

    #[test]
    fn window_one_smoothing_is_identity() {
        let panel = raw_panel(vec![
            entry("A", "x", 2000, 3.0),
            entry("A", "x", 2001, 5.0),
            entry("B", "y", 2000, 7.0),
        ]);
        let smoothed = smooth_moving_average(&panel, 1).unwrap();
        assert_eq!(smoothed.len(), 3);
        for (s, r) in smoothed.entries().iter().zip(panel.entries()) {
            assert_eq!(s.value, r.value);
            assert_eq!(s.year, r.year);
        }
        assert_eq!(smoothed.provenance(), Provenance::Smoothed);
    }

    #[test]
    fn four_year_window_averages_with_implicit_zeros() {
        // Raw values 2019..2022 = (0, 4, 4, 8): the 2019 cell is absent.
        let panel = raw_panel(vec![
            entry("A", "x", 2019, 0.0),
            entry("A", "x", 2020, 4.0),
            entry("A", "x", 2021, 4.0),
            entry("A", "x", 2022, 8.0),
        ]);
        let smoothed = smooth_moving_average(&panel, 4).unwrap();
        assert_eq!(smoothed.len(), 1);
        let e = &smoothed.entries()[0];
        assert_eq!(e.year, 2022);
        assert_eq!(e.value, 4.0);

        // The same result without the explicit zero row.
        let sparse = raw_panel(vec![
            entry("A", "x", 2019, 0.0),
            entry("A", "y", 2019, 1.0),
            entry("A", "y", 2020, 4.0),
            entry("A", "y", 2021, 4.0),
            entry("A", "y", 2022, 8.0),
        ]);
        let smoothed = smooth_moving_average(&sparse, 4).unwrap();
        let y_entry = smoothed
            .entries()
            .iter()
            .find(|e| e.activity == "y")
            .unwrap();
        assert_eq!(y_entry.value, (1.0 + 4.0 + 4.0 + 8.0) / 4.0);
    }

    #[test]
    fn full_window_years_restrict_output_range() {
        let mut entries = Vec::new();
        for year in 1998..=2022 {
            entries.push(entry("A", "x", year, 1.0));
        }
        let smoothed = smooth_moving_average(&raw_panel(entries), 4).unwrap();
        assert_eq!(smoothed.years(), Some((2001, 2022)));
        assert_eq!(smoothed.years_present(), (2001..=2022).collect::<Vec<_>>());
    }

    #[test]
    fn oversized_window_is_rejected() {
        let panel = raw_panel(vec![entry("A", "x", 2000, 1.0), entry("A", "x", 2001, 1.0)]);
        assert!(matches!(
            smooth_moving_average(&panel, 3),
            Err(Error::WindowTooLarge { .. })
        ));
    }

    fn smoothed_panel(entries: Vec<PanelEntry<f64>>) -> OutputPanel<f64> {
        OutputPanel::from_entries(entries, Provenance::Smoothed, Some(1), None).unwrap()
    }

    #[test]
    fn zero_thresholds_leave_panel_unchanged() {
        let panel = smoothed_panel(vec![
            entry("A", "x", 2000, 5.0),
            entry("B", "x", 2000, 2.0),
            entry("B", "y", 2001, 1.0),
        ]);
        let filtered = apply_filters(&panel, None, &FilterRules::none()).unwrap();
        assert_eq!(filtered.entries(), panel.entries());
        assert_eq!(filtered.provenance(), Provenance::Filtered);
    }

    #[test]
    fn trade_location_threshold_is_per_year() {
        // Location B clears USD 1B only in 2001.
        let panel = smoothed_panel(vec![
            entry("A", "x", 2000, 2.0e9),
            entry("B", "x", 2000, 0.9e9),
            entry("A", "x", 2001, 2.0e9),
            entry("B", "x", 2001, 1.5e9),
        ]);
        let mut rules: FilterRules<f64> = FilterRules::trade_defaults();
        rules.min_population = None;
        let filtered = apply_filters(&panel, None, &rules).unwrap();
        let b_years: Vec<i32> = filtered
            .entries()
            .iter()
            .filter(|e| e.location == "B")
            .map(|e| e.year)
            .collect();
        assert_eq!(b_years, vec![2001]);
    }

    #[test]
    fn small_activity_total_is_excluded() {
        let panel = smoothed_panel(vec![
            entry("A", "x", 2000, 2.0e9),
            entry("B", "x", 2000, 1.5e9),
            entry("A", "tiny", 2000, 3.0e5),
            entry("B", "tiny", 2000, 1.0e5),
        ]);
        let mut rules: FilterRules<f64> = FilterRules::trade_defaults();
        rules.min_population = None;
        let filtered = apply_filters(&panel, None, &rules).unwrap();
        assert!(filtered.entries().iter().all(|e| e.activity != "tiny"));
    }

    #[test]
    fn population_rule_needs_macro_coverage() {
        let panel = smoothed_panel(vec![entry("A", "x", 2000, 2.0e9)]);
        let rules: FilterRules<f64> = FilterRules::trade_defaults();
        let empty = MacroSeries::from_rows(vec![MacroRow {
            location: "Z".to_string(),
            year: 1999,
            gdp_pc_ppp: 1.0,
            population: 2e6,
        }])
        .unwrap();
        assert!(matches!(
            apply_filters(&panel, Some(&empty), &rules),
            Err(Error::MissingMacro { .. })
        ));
    }

    #[test]
    fn filtering_is_idempotent() {
        let panel = smoothed_panel(vec![
            entry("A", "x", 2000, 2.0e9),
            entry("A", "y", 2000, 4.0e5),
            entry("B", "x", 2000, 0.5e9),
            entry("C", "x", 2000, 1.2e9),
            entry("C", "y", 2000, 2.0e5),
        ]);
        let mut rules: FilterRules<f64> = FilterRules::trade_defaults();
        rules.min_population = None;
        let once = apply_filters(&panel, None, &rules).unwrap();
        let twice = apply_filters(&once, None, &rules).unwrap();
        assert_eq!(once.entries(), twice.entries());
    }

    #[test]
    fn save_load_round_trip_is_byte_identical() {
        let panel = smoothed_panel(vec![
            entry("A", "x", 2000, 0.1),
            entry("A", "y", 2001, 12345.678),
            entry("B", "x", 2000, 3.0),
        ]);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("panel.tsv");
        save_panel(&panel, &path).unwrap();
        let loaded: OutputPanel<f64> = load_saved_panel(&path).unwrap();
        assert_eq!(loaded, panel);
        assert_eq!(panel_to_string(&loaded), panel_to_string(&panel));
    }

    #[test]
    fn truncated_file_fails_integrity_check() {
        let panel = smoothed_panel(vec![entry("A", "x", 2000, 1.0), entry("B", "x", 2000, 2.0)]);
        let text = panel_to_string(&panel);
        let truncated: String = text.lines().take(5).map(|l| format!("{l}\n")).collect();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("panel.tsv");
        fs::write(&path, truncated).unwrap();
        assert!(matches!(
            load_saved_panel::<f64>(&path),
            Err(Error::Corrupt { .. })
        ));
    }

    #[test]
    fn version_mismatch_is_detected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("panel.tsv");
        fs::write(&path, "eciopt-panel 99\nprovenance raw\nyears none\nentries 0\n").unwrap();
        assert!(matches!(
            load_saved_panel::<f64>(&path),
            Err(Error::FormatVersion { .. })
        ));
    }

    #[test]
    fn empty_panel_round_trips() {
        let panel =
            OutputPanel::<f64>::from_entries(Vec::new(), Provenance::Raw, None, None).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("panel.tsv");
        save_panel(&panel, &path).unwrap();
        let loaded: OutputPanel<f64> = load_saved_panel(&path).unwrap();
        assert!(loaded.is_empty());
        assert_eq!(loaded, panel);
    }
}
