//! Steppingstone forecast models.
//!
//! The calibration regresses `log(RCA+1)` at a horizon on its value at a
//! steppingstone year, its value at the start year, and the relatedness and
//! relative relatedness at the start year, separately for entry cells
//! (RCA < 1 at the start) and exit cells (RCA >= 1). Coefficients are
//! averaged across every feasible start year, and the fitted pair of models
//! turns a start-year snapshot into a predicted specialization matrix and
//! future PCI.

use std::collections::BTreeMap;
use std::ops::RangeInclusive;

use crate::complexity::{
    compute_eci_pci, compute_rca, compute_relatedness, RelatednessField,
    SpecializationSnapshot,
};
use crate::error::{Error, Result};
use crate::linalg::least_squares;
use crate::matrix::Matrix;
use crate::panel::OutputPanel;
use crate::scalar::{lit, Scalar};
use crate::stats::{mean, two_sided_p};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Regime {
    /// Cells with `RCA < 1` at the start year: potential entries.
    Entry,
    /// Cells with `RCA >= 1` at the start year: potential exits.
    Exit,
}

impl Regime {
    pub fn as_str(self) -> &'static str {
        match self {
            Regime::Entry => "entry",
            Regime::Exit => "exit",
        }
    }
}

/// One calibration observation.
#[derive(Clone, Debug)]
pub struct RegressionRow<T> {
    pub location: String,
    pub activity: String,
    /// `log(RCA + 1)` at `t + delta_t`.
    pub y: T,
    /// `log(RCA + 1)` at the steppingstone `t + tau`.
    pub x1: T,
    /// `log(RCA + 1)` at the start year `t`.
    pub x2: T,
    /// Relatedness density at `t`.
    pub x3: T,
    /// Relative relatedness at `t`.
    pub x4: T,
    pub regime: Regime,
    pub start_year: i32,
}

/// Snapshot plus relatedness for one year.
#[derive(Clone, Debug)]
pub struct YearData<T> {
    pub snapshot: SpecializationSnapshot<T>,
    pub relatedness: RelatednessField<T>,
}

pub type YearMap<T> = BTreeMap<i32, YearData<T>>;

/// Builds snapshots and relatedness fields for the given years.
pub fn year_data_for<T: Scalar>(panel: &OutputPanel<T>, years: &[i32]) -> Result<YearMap<T>> {
    let mut map = BTreeMap::new();
    for &year in years {
        let snapshot = compute_rca(panel, year)?;
        let relatedness = compute_relatedness(&snapshot)?;
        map.insert(year, YearData {
            snapshot,
            relatedness,
        });
    }
    Ok(map)
}

/// Builds year data for every year present in the panel.
pub fn all_year_data<T: Scalar>(panel: &OutputPanel<T>) -> Result<YearMap<T>> {
    year_data_for(panel, &panel.years_present())
}

/// Assembles regression rows for one `(t, tau, delta_t, regime)` choice.
///
/// A `(location, activity)` cell contributes one row when both ids exist in
/// the universes of all three years and the cell matches the regime at `t`;
/// cells absent from a year's entries count as RCA 0 there.
pub fn assemble_rows<T: Scalar>(
    years: &YearMap<T>,
    t: i32,
    tau: u32,
    delta_t: u32,
    regime: Regime,
) -> Result<Vec<RegressionRow<T>>> {
    if tau == 0 || tau >= delta_t {
        return Err(Error::Config(format!(
            "steppingstone tau={tau} must satisfy 0 < tau < delta_t={delta_t}"
        )));
    }
    let at = |year: i32| years.get(&year).ok_or(Error::MissingYear(year));
    let base = at(t)?;
    let stepping = at(t + tau as i32)?;
    let horizon = at(t + delta_t as i32)?;

    let mut rows = Vec::new();
    for (c_base, location) in base.snapshot.locations.iter().enumerate() {
        let c_step = match stepping.snapshot.location_pos(location) {
            Some(i) => i,
            None => continue,
        };
        let c_hor = match horizon.snapshot.location_pos(location) {
            Some(i) => i,
            None => continue,
        };
        for (p_base, activity) in base.snapshot.activities.iter().enumerate() {
            let p_step = match stepping.snapshot.activity_pos(activity) {
                Some(i) => i,
                None => continue,
            };
            let p_hor = match horizon.snapshot.activity_pos(activity) {
                Some(i) => i,
                None => continue,
            };
            let in_regime = match regime {
                Regime::Entry => !base.snapshot.m[(c_base, p_base)],
                Regime::Exit => base.snapshot.m[(c_base, p_base)],
            };
            if !in_regime {
                continue;
            }
            rows.push(RegressionRow {
                location: location.clone(),
                activity: activity.clone(),
                y: log1p_rca(horizon.snapshot.rca[(c_hor, p_hor)]),
                x1: log1p_rca(stepping.snapshot.rca[(c_step, p_step)]),
                x2: log1p_rca(base.snapshot.rca[(c_base, p_base)]),
                x3: base.relatedness.omega[(c_base, p_base)],
                x4: base.relatedness.omega_rel[(c_base, p_base)],
                regime,
                start_year: t,
            });
        }
    }
    if rows.is_empty() {
        return Err(Error::EmptyRegime {
            regime: regime.as_str().to_string(),
            start_year: t,
        });
    }
    Ok(rows)
}

#[inline]
fn log1p_rca<T: Scalar>(rca: T) -> T {
    (rca + T::one()).ln()
}

/// Fitted (or averaged) steppingstone model.
///
/// `coefficients[0]` is the intercept b0; `coefficients[1..=4]` are b1..b4
/// for the steppingstone, start-year, relatedness and relative-relatedness
/// terms. Standard errors and p-values on an averaged model are descriptive
/// averages, not pooled inference.
#[derive(Clone, Debug)]
pub struct SteppingstoneModel<T> {
    pub regime: Regime,
    pub delta_t: u32,
    pub tau: u32,
    pub coefficients: [T; 5],
    pub std_errors: [T; 5],
    pub p_values: [T; 5],
    pub r2: T,
    pub adjusted_r2: T,
    pub n_obs: usize,
    pub start_years: Vec<i32>,
}

const N_TERMS: usize = 5;

impl<T: Scalar> SteppingstoneModel<T> {
    /// Steppingstone coefficient b1.
    pub fn b1(&self) -> T {
        self.coefficients[1]
    }
}

/// Fits one OLS model on rows from a single start year.
pub fn fit_ols<T: Scalar>(
    rows: &[RegressionRow<T>],
    delta_t: u32,
    tau: u32,
) -> Result<SteppingstoneModel<T>> {
    let n = rows.len();
    if n < N_TERMS + 1 {
        return Err(Error::TooFewRows {
            needed: N_TERMS + 1,
            got: n,
        });
    }
    let regime = rows[0].regime;
    let start_year = rows[0].start_year;
    if rows
        .iter()
        .any(|r| r.regime != regime || r.start_year != start_year)
    {
        return Err(Error::MixedModels(
            "rows mix regimes or start years".to_string(),
        ));
    }

    let design = Matrix::from_fn(n, N_TERMS, |r, c| match c {
        0 => T::one(),
        1 => rows[r].x1,
        2 => rows[r].x2,
        3 => rows[r].x3,
        _ => rows[r].x4,
    });
    let y: Vec<T> = rows.iter().map(|r| r.y).collect();
    let fit = least_squares(&design, &y)?;

    let ssr: T = fit.residuals.iter().map(|e| *e * *e).sum();
    let y_mean = mean(&y);
    let sst: T = y.iter().map(|v| (*v - y_mean) * (*v - y_mean)).sum();
    if sst <= T::zero() {
        return Err(Error::Degenerate(
            "dependent variable has no variance".to_string(),
        ));
    }
    let r2 = T::one() - ssr / sst;
    let n_t: T = lit(n as f64);
    let k_t: T = lit(N_TERMS as f64);
    let adjusted_r2 = T::one() - (T::one() - r2) * (n_t - T::one()) / (n_t - k_t);

    let df = n - N_TERMS;
    let s2 = ssr / lit(df as f64);
    let mut coefficients = [T::zero(); N_TERMS];
    let mut std_errors = [T::zero(); N_TERMS];
    let mut p_values = [T::zero(); N_TERMS];
    for j in 0..N_TERMS {
        coefficients[j] = fit.coefficients[j];
        std_errors[j] = (s2 * fit.xtx_inverse[(j, j)]).sqrt();
        let t_stat = if std_errors[j] > T::zero() {
            coefficients[j] / std_errors[j]
        } else {
            T::infinity()
        };
        p_values[j] = two_sided_p(t_stat, df, n);
    }

    Ok(SteppingstoneModel {
        regime,
        delta_t,
        tau,
        coefficients,
        std_errors,
        p_values,
        r2,
        adjusted_r2,
        n_obs: n,
        start_years: vec![start_year],
    })
}

/// Coefficient-wise arithmetic mean of models sharing a regime and timing.
///
/// Observation counts are summed, start years are concatenated, and standard
/// errors, p-values and fit statistics are averaged as descriptive summaries.
pub fn average_models<T: Scalar>(models: &[SteppingstoneModel<T>]) -> Result<SteppingstoneModel<T>> {
    let first = models
        .first()
        .ok_or_else(|| Error::MixedModels("no models to average".to_string()))?;
    if models.iter().any(|m| {
        m.regime != first.regime || m.delta_t != first.delta_t || m.tau != first.tau
    }) {
        return Err(Error::MixedModels(
            "models differ in regime, delta_t, or tau".to_string(),
        ));
    }

    let mut ordered: Vec<&SteppingstoneModel<T>> = models.iter().collect();
    ordered.sort_by_key(|m| m.start_years.first().copied().unwrap_or(i32::MIN));

    let count: T = lit(ordered.len() as f64);
    let mut coefficients = [T::zero(); N_TERMS];
    let mut std_errors = [T::zero(); N_TERMS];
    let mut p_values = [T::zero(); N_TERMS];
    let mut r2 = T::zero();
    let mut adjusted_r2 = T::zero();
    let mut n_obs = 0usize;
    let mut start_years = Vec::new();
    for m in &ordered {
        for j in 0..N_TERMS {
            coefficients[j] += m.coefficients[j];
            std_errors[j] += m.std_errors[j];
            p_values[j] += m.p_values[j];
        }
        r2 += m.r2;
        adjusted_r2 += m.adjusted_r2;
        n_obs += m.n_obs;
        start_years.extend_from_slice(&m.start_years);
    }
    for j in 0..N_TERMS {
        coefficients[j] /= count;
        std_errors[j] /= count;
        p_values[j] /= count;
    }
    start_years.sort_unstable();
    start_years.dedup();

    Ok(SteppingstoneModel {
        regime: first.regime,
        delta_t: first.delta_t,
        tau: first.tau,
        coefficients,
        std_errors,
        p_values,
        r2: r2 / count,
        adjusted_r2: adjusted_r2 / count,
        n_obs,
        start_years,
    })
}

/// Fits one model per feasible start year, ascending.
pub fn fit_start_years<T: Scalar>(
    years: &YearMap<T>,
    delta_t: u32,
    tau: u32,
    regime: Regime,
) -> Result<Vec<SteppingstoneModel<T>>> {
    let mut models = Vec::new();
    for &t in years.keys() {
        if !years.contains_key(&(t + tau as i32)) || !years.contains_key(&(t + delta_t as i32)) {
            continue;
        }
        let rows = assemble_rows(years, t, tau, delta_t, regime)?;
        models.push(fit_ols(&rows, delta_t, tau)?);
    }
    if models.is_empty() {
        return Err(Error::NoStartYears { delta_t, tau });
    }
    Ok(models)
}

/// Average of the per-start-year fits: the calibration used downstream.
pub fn calibrate<T: Scalar>(
    years: &YearMap<T>,
    delta_t: u32,
    tau: u32,
    regime: Regime,
) -> Result<SteppingstoneModel<T>> {
    average_models(&fit_start_years(years, delta_t, tau, regime)?)
}

/// Averaged entry and exit models for one `(delta_t, tau)` cell.
#[derive(Clone, Debug)]
pub struct SweepEntry<T> {
    pub delta_t: u32,
    pub tau: u32,
    pub entry: SteppingstoneModel<T>,
    pub exit: SteppingstoneModel<T>,
}

/// Calibrates averaged entry and exit models over a `(delta_t, tau)` grid.
///
/// Pairs with `tau >= delta_t` or without any feasible start year are
/// skipped; an entirely empty grid is an error.
pub fn sweep<T: Scalar>(
    years: &YearMap<T>,
    delta_t_range: RangeInclusive<u32>,
    tau_range: RangeInclusive<u32>,
) -> Result<Vec<SweepEntry<T>>> {
    let mut entries = Vec::new();
    for delta_t in delta_t_range {
        for tau in tau_range.clone() {
            if tau == 0 || tau >= delta_t {
                continue;
            }
            let entry = match calibrate(years, delta_t, tau, Regime::Entry) {
                Ok(m) => m,
                Err(Error::NoStartYears { .. }) => continue,
                Err(e) => return Err(e),
            };
            let exit = match calibrate(years, delta_t, tau, Regime::Exit) {
                Ok(m) => m,
                Err(Error::NoStartYears { .. }) => continue,
                Err(e) => return Err(e),
            };
            entries.push(SweepEntry {
                delta_t,
                tau,
                entry,
                exit,
            });
        }
    }
    if entries.is_empty() {
        return Err(Error::EmptySweep);
    }
    Ok(entries)
}

/// Model-implied state at the horizon year.
#[derive(Clone, Debug)]
pub struct FuturePrediction<T> {
    pub horizon_year: i32,
    pub delta_t: u32,
    pub tau: u32,
    /// Universe of the start-year snapshot the prediction is aligned to.
    pub locations: Vec<String>,
    pub activities: Vec<String>,
    /// Predicted `log(RCA + 1)` per cell.
    pub r_hat: Matrix<T>,
    /// `r_hat >= ln 2`, i.e. predicted `RCA >= 1`.
    pub m_pred: Matrix<bool>,
    /// Future PCI (z-scored) for activities kept in the predicted matrix.
    pub pci_future: BTreeMap<String, T>,
    /// Predicted ECI: average future PCI over each location's predicted
    /// specializations (not re-standardized).
    pub eci_pred: BTreeMap<String, T>,
    /// Locations with an empty predicted row or outside the scored component.
    pub excluded_locations: Vec<String>,
    /// Activities nobody is predicted to hold, or outside the component.
    pub excluded_activities: Vec<String>,
}

/// Applies the regime-matching model to every cell of the start-year
/// snapshot with the steppingstone term held at the start-year value
/// (zero added effort), then binarizes and scores the predicted matrix.
pub fn predict_future<T: Scalar>(
    entry: &SteppingstoneModel<T>,
    exit: &SteppingstoneModel<T>,
    snapshot: &SpecializationSnapshot<T>,
    relatedness: &RelatednessField<T>,
) -> Result<FuturePrediction<T>> {
    if entry.regime != Regime::Entry || exit.regime != Regime::Exit {
        return Err(Error::MixedModels(
            "predict_future needs one entry and one exit model".to_string(),
        ));
    }
    if entry.delta_t != exit.delta_t || entry.tau != exit.tau {
        return Err(Error::MixedModels(
            "entry and exit models disagree on delta_t or tau".to_string(),
        ));
    }

    let nl = snapshot.locations.len();
    let na = snapshot.activities.len();
    let ln2: T = lit(std::f64::consts::LN_2);

    let mut r_hat = Matrix::filled(nl, na, T::zero());
    let mut m_pred = Matrix::filled(nl, na, false);
    for c in 0..nl {
        for p in 0..na {
            let model = if snapshot.m[(c, p)] { exit } else { entry };
            let r_t = log1p_rca(snapshot.rca[(c, p)]);
            let b = &model.coefficients;
            let value = b[0]
                + (b[1] + b[2]) * r_t
                + b[3] * relatedness.omega[(c, p)]
                + b[4] * relatedness.omega_rel[(c, p)];
            r_hat[(c, p)] = value;
            m_pred[(c, p)] = value >= ln2;
        }
    }

    // Reduce to locations and activities that keep at least one predicted
    // specialization before scoring.
    let kept_locs: Vec<usize> = (0..nl)
        .filter(|&c| (0..na).any(|p| m_pred[(c, p)]))
        .collect();
    let kept_acts: Vec<usize> = (0..na)
        .filter(|&p| (0..nl).any(|c| m_pred[(c, p)]))
        .collect();
    if kept_locs.is_empty() || kept_acts.is_empty() {
        return Err(Error::Degenerate(
            "prediction leaves no specializations to score".to_string(),
        ));
    }
    let reduced = Matrix::from_fn(kept_locs.len(), kept_acts.len(), |c, p| {
        m_pred[(kept_locs[c], kept_acts[p])]
    });
    let reduced_locs: Vec<String> = kept_locs
        .iter()
        .map(|&c| snapshot.locations[c].clone())
        .collect();
    let reduced_acts: Vec<String> = kept_acts
        .iter()
        .map(|&p| snapshot.activities[p].clone())
        .collect();

    let scores = compute_eci_pci::<T>(&reduced, &reduced_locs, &reduced_acts)?;
    let pci_future = scores.pci_map();

    // Raw average of future PCI over each scored location's predicted row;
    // component closure guarantees every held activity is priced.
    let act_pos: BTreeMap<&str, usize> = reduced_acts
        .iter()
        .enumerate()
        .map(|(i, a)| (a.as_str(), i))
        .collect();
    let loc_pos: BTreeMap<&str, usize> = reduced_locs
        .iter()
        .enumerate()
        .map(|(i, l)| (l.as_str(), i))
        .collect();
    let mut eci_pred = BTreeMap::new();
    for location in &scores.locations {
        let c = loc_pos[location.as_str()];
        let mut sum = T::zero();
        let mut count = 0usize;
        for (activity, value) in &pci_future {
            if reduced[(c, act_pos[activity.as_str()])] {
                sum += *value;
                count += 1;
            }
        }
        debug_assert!(count > 0);
        eci_pred.insert(location.clone(), sum / lit(count as f64));
    }

    let mut excluded_locations: Vec<String> = snapshot
        .locations
        .iter()
        .filter(|l| !eci_pred.contains_key(*l))
        .cloned()
        .collect();
    excluded_locations.sort();
    let mut excluded_activities: Vec<String> = snapshot
        .activities
        .iter()
        .filter(|a| !pci_future.contains_key(*a))
        .cloned()
        .collect();
    excluded_activities.sort();

    Ok(FuturePrediction {
        horizon_year: snapshot.year + entry.delta_t as i32,
        delta_t: entry.delta_t,
        tau: entry.tau,
        locations: snapshot.locations.clone(),
        activities: snapshot.activities.clone(),
        r_hat,
        m_pred,
        pci_future,
        eci_pred,
        excluded_locations,
        excluded_activities,
    })
}
