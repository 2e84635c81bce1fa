//! Panel growth regression linking ECI to annualized GDP-per-capita growth,
//! and its inversion from a growth target to a target ECI.
//!
//! The dependent variable is the annualized log growth rate in percent per
//! year over each period. Besides ECI, the regressors are the z-score of log
//! initial GDP per capita (normalized within each period's sample), their
//! interaction, and period fixed effects that absorb the intercept. Standard
//! errors are heteroskedasticity-robust (HC1).

use std::collections::BTreeMap;

use crate::complexity::ComplexityScores;
use crate::error::{Error, Result};
use crate::linalg::least_squares;
use crate::matrix::Matrix;
use crate::panel::MacroSeries;
use crate::scalar::{lit, to_f64, Scalar};
use crate::stats::{mean, standardize};

/// One location-period observation.
#[derive(Clone, Debug)]
pub struct GrowthRow<T> {
    pub location: String,
    pub period_start: i32,
    /// Annualized growth of GDP per capita over the period, percent per year.
    pub growth_pct: T,
    /// ECI at the period start.
    pub eci: T,
    /// Z-score of log initial GDP per capita within the period sample.
    pub log_gdppc_z: T,
}

/// Assembled regression panel plus the normalization stats behind the
/// z-scores, keyed by period start year.
#[derive(Clone, Debug)]
pub struct GrowthPanel<T> {
    pub rows: Vec<GrowthRow<T>>,
    /// `(mean, std)` of log GDP per capita across each period's sample.
    pub norm_stats: BTreeMap<i32, (T, T)>,
}

/// Builds growth rows for the given `(start, end)` periods.
///
/// A location enters a period when it has GDP per capita at both endpoints
/// and an ECI score at the start year; each period needs at least two such
/// locations for the z-score to exist.
pub fn assemble_growth_panel<T: Scalar>(
    macro_series: &MacroSeries<T>,
    eci_history: &BTreeMap<i32, ComplexityScores<T>>,
    periods: &[(i32, i32)],
) -> Result<GrowthPanel<T>> {
    if periods.is_empty() {
        return Err(Error::Config("no growth periods given".to_string()));
    }
    let mut rows = Vec::new();
    let mut norm_stats = BTreeMap::new();
    for &(start, end) in periods {
        if end <= start {
            return Err(Error::Config(format!(
                "growth period {start}..{end} must end after it starts"
            )));
        }
        let scores = eci_history
            .get(&start)
            .ok_or(Error::MissingYear(start))?;
        let eci_map = scores.eci_map();

        let mut sample: Vec<(String, T, T)> = Vec::new();
        for (location, eci) in &eci_map {
            let Some(begin) = macro_series.get(location, start) else {
                continue;
            };
            let Some(finish) = macro_series.get(location, end) else {
                continue;
            };
            let years: T = lit((end - start) as f64);
            let growth = lit::<T>(100.0) * (finish.gdp_pc_ppp / begin.gdp_pc_ppp).ln() / years;
            sample.push((location.clone(), *eci, growth));
        }
        if sample.len() < 2 {
            return Err(Error::TooFewRows {
                needed: 2,
                got: sample.len(),
            });
        }
        let log_gdppc: Vec<T> = sample
            .iter()
            .map(|(location, _, _)| {
                macro_series
                    .get(location, start)
                    .expect("sample membership checked above")
                    .gdp_pc_ppp
                    .ln()
            })
            .collect();
        let (z, z_mean, z_std) = standardize(&log_gdppc)?;
        norm_stats.insert(start, (z_mean, z_std));
        for ((location, eci, growth), z_value) in sample.into_iter().zip(z) {
            rows.push(GrowthRow {
                location,
                period_start: start,
                growth_pct: growth,
                eci,
                log_gdppc_z: z_value,
            });
        }
    }
    Ok(GrowthPanel { rows, norm_stats })
}

/// Fitted growth model with period fixed effects absorbing the intercept.
#[derive(Clone, Debug)]
pub struct GrowthModel<T> {
    /// a1: ECI coefficient.
    pub eci_coef: T,
    /// a2: coefficient on the z-scored log initial GDP per capita.
    pub log_gdppc_coef: T,
    /// a3: interaction coefficient.
    pub interaction_coef: T,
    /// Period fixed effects, keyed by period start year.
    pub period_effects: BTreeMap<i32, T>,
    pub eci_se: T,
    pub log_gdppc_se: T,
    pub interaction_se: T,
    pub period_ses: BTreeMap<i32, T>,
    pub r2: T,
    pub n_obs: usize,
    /// Normalization stats carried over from the panel, for scoring new
    /// observations; prediction years beyond the panel reuse the latest.
    pub norm_stats: BTreeMap<i32, (T, T)>,
    /// Realized `(location, period_start)` sample, for audit.
    pub sample: Vec<(String, i32)>,
    pub notes: Vec<String>,
}

/// Fits the growth regression with HC1 robust standard errors.
pub fn fit_growth_model<T: Scalar>(panel: &GrowthPanel<T>) -> Result<GrowthModel<T>> {
    let n = panel.rows.len();
    if n <= 4 {
        return Err(Error::TooFewRows { needed: 5, got: n });
    }
    let mut period_starts: Vec<i32> = panel.rows.iter().map(|r| r.period_start).collect();
    period_starts.sort_unstable();
    period_starts.dedup();
    let mut notes = Vec::new();
    if period_starts.len() == 1 {
        notes.push(
            "single-period panel: the period effect is just an intercept".to_string(),
        );
    }

    let k = 3 + period_starts.len();
    let design = Matrix::from_fn(n, k, |r, c| {
        let row = &panel.rows[r];
        match c {
            0 => row.eci,
            1 => row.log_gdppc_z,
            2 => row.eci * row.log_gdppc_z,
            _ => {
                if row.period_start == period_starts[c - 3] {
                    T::one()
                } else {
                    T::zero()
                }
            }
        }
    });
    let y: Vec<T> = panel.rows.iter().map(|r| r.growth_pct).collect();
    let fit = least_squares(&design, &y)?;

    let ssr: T = fit.residuals.iter().map(|e| *e * *e).sum();
    let y_mean = mean(&y);
    let sst: T = y.iter().map(|v| (*v - y_mean) * (*v - y_mean)).sum();
    if sst <= T::zero() {
        return Err(Error::Degenerate(
            "growth rates have no variance".to_string(),
        ));
    }
    let r2 = T::one() - ssr / sst;

    // HC1 sandwich: (X'X)^-1 (sum e_i^2 x_i x_i') (X'X)^-1 * n/(n-k).
    let mut meat = Matrix::filled(k, k, T::zero());
    for r in 0..n {
        let e2 = fit.residuals[r] * fit.residuals[r];
        for i in 0..k {
            for j in 0..k {
                meat[(i, j)] += e2 * design[(r, i)] * design[(r, j)];
            }
        }
    }
    let dof_scale: T = lit::<T>(n as f64) / lit::<T>((n - k) as f64);
    let mut robust_var = vec![T::zero(); k];
    for i in 0..k {
        let mut value = T::zero();
        for a in 0..k {
            for b in 0..k {
                value += fit.xtx_inverse[(i, a)] * meat[(a, b)] * fit.xtx_inverse[(b, i)];
            }
        }
        robust_var[i] = value * dof_scale;
    }

    let mut period_effects = BTreeMap::new();
    let mut period_ses = BTreeMap::new();
    for (idx, &start) in period_starts.iter().enumerate() {
        period_effects.insert(start, fit.coefficients[3 + idx]);
        period_ses.insert(start, robust_var[3 + idx].sqrt());
    }
    let sample = panel
        .rows
        .iter()
        .map(|r| (r.location.clone(), r.period_start))
        .collect();

    Ok(GrowthModel {
        eci_coef: fit.coefficients[0],
        log_gdppc_coef: fit.coefficients[1],
        interaction_coef: fit.coefficients[2],
        period_effects,
        eci_se: robust_var[0].sqrt(),
        log_gdppc_se: robust_var[1].sqrt(),
        interaction_se: robust_var[2].sqrt(),
        period_ses,
        r2,
        n_obs: n,
        norm_stats: panel.norm_stats.clone(),
        sample,
        notes,
    })
}

impl<T: Scalar> GrowthModel<T> {
    fn effect_for(&self, period: Option<i32>) -> Result<T> {
        match period {
            Some(start) => self
                .period_effects
                .get(&start)
                .copied()
                .ok_or(Error::UnknownPeriod(start)),
            None => Ok(*self
                .period_effects
                .values()
                .next_back()
                .expect("fitted model has at least one period effect")),
        }
    }

    /// Z-scores a log GDP per capita against the latest panel period's
    /// normalization stats (used for prediction years beyond the panel).
    pub fn latest_z(&self, log_gdppc: T) -> T {
        let (mean, std) = *self
            .norm_stats
            .values()
            .next_back()
            .expect("fitted model has normalization stats");
        (log_gdppc - mean) / std
    }
}

/// Expected growth (percent per year) at the given ECI and income z-score,
/// under the chosen period's conditions (default: the latest period).
pub fn predict_growth<T: Scalar>(
    model: &GrowthModel<T>,
    eci: T,
    z: T,
    period: Option<i32>,
) -> Result<T> {
    let gamma = model.effect_for(period)?;
    Ok(model.eci_coef * eci
        + model.log_gdppc_coef * z
        + model.interaction_coef * eci * z
        + gamma)
}

/// Minimum slope magnitude below which the inversion is refused.
pub const INVERSION_SLOPE_EPS: f64 = 1e-6;

/// ECI that supports the target growth rate: the growth equation solved for
/// ECI at fixed income conditions.
pub fn invert_target_eci<T: Scalar>(
    model: &GrowthModel<T>,
    target_growth: T,
    z: T,
    period: Option<i32>,
) -> Result<T> {
    let gamma = model.effect_for(period)?;
    let slope = model.eci_coef + model.interaction_coef * z;
    if slope.abs() <= lit(INVERSION_SLOPE_EPS) {
        return Err(Error::SingularSlope(to_f64(slope)));
    }
    Ok((target_growth - model.log_gdppc_coef * z - gamma) / slope)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::panel::MacroRow;
    use approx::assert_relative_eq;

    fn scores_for(year_locations: &[(&str, f64)]) -> ComplexityScores<f64> {
        ComplexityScores {
            locations: year_locations.iter().map(|(l, _)| l.to_string()).collect(),
            eci: year_locations.iter().map(|(_, e)| *e).collect(),
            activities: Vec::new(),
            pci: Vec::new(),
            orientation_anchor: String::new(),
            eci_standardization: (0.0, 1.0),
            pci_standardization: (0.0, 1.0),
            excluded_locations: Vec::new(),
            excluded_activities: Vec::new(),
        }
    }

    fn macro_rows(rows: &[(&str, i32, f64, f64)]) -> MacroSeries<f64> {
        MacroSeries::from_rows(
            rows.iter()
                .map(|(l, y, g, p)| MacroRow {
                    location: l.to_string(),
                    year: *y,
                    gdp_pc_ppp: *g,
                    population: *p,
                })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn doubling_gdp_is_about_seven_percent_annualized() {
        let macros = macro_rows(&[
            ("A", 2000, 10_000.0, 5e6),
            ("A", 2010, 20_000.0, 5e6),
            ("B", 2000, 8_000.0, 5e6),
            ("B", 2010, 8_000.0, 5e6),
        ]);
        let mut history = BTreeMap::new();
        history.insert(2000, scores_for(&[("A", 0.5), ("B", -0.5)]));
        let panel = assemble_growth_panel(&macros, &history, &[(2000, 2010)]).unwrap();
        assert_eq!(panel.rows.len(), 2);
        let a = panel.rows.iter().find(|r| r.location == "A").unwrap();
        assert_relative_eq!(a.growth_pct, 10.0 * std::f64::consts::LN_2, epsilon = 1e-12);
        let b = panel.rows.iter().find(|r| r.location == "B").unwrap();
        assert_relative_eq!(b.growth_pct, 0.0);
        // Z-scores within the two-location sample are +-1.
        assert_relative_eq!(a.log_gdppc_z.abs(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn one_location_periods_are_rejected() {
        let macros = macro_rows(&[("A", 2000, 1e4, 5e6), ("A", 2010, 2e4, 5e6)]);
        let mut history = BTreeMap::new();
        history.insert(2000, scores_for(&[("A", 0.5)]));
        assert!(matches!(
            assemble_growth_panel(&macros, &history, &[(2000, 2010)]),
            Err(Error::TooFewRows { .. })
        ));
    }

    fn synthetic_panel(
        a1: f64,
        a2: f64,
        a3: f64,
        gammas: &[(i32, f64)],
        noise: impl Fn(usize) -> f64,
    ) -> GrowthPanel<f64> {
        let mut rows = Vec::new();
        let mut norm_stats = BTreeMap::new();
        let mut i = 0usize;
        for &(start, gamma) in gammas {
            norm_stats.insert(start, (9.0, 1.2));
            for loc in 0..12 {
                let eci = (loc as f64 - 5.5) / 3.0 + 0.05 * (start % 7) as f64;
                let z = ((loc * 7 + start as usize) % 11) as f64 / 5.0 - 1.0;
                rows.push(GrowthRow {
                    location: format!("L{loc:02}"),
                    period_start: start,
                    growth_pct: a1 * eci + a2 * z + a3 * eci * z + gamma + noise(i),
                    eci,
                    log_gdppc_z: z,
                });
                i += 1;
            }
        }
        GrowthPanel { rows, norm_stats }
    }

    #[test]
    fn noise_free_panel_recovers_exactly() {
        let truth = (1.073, -1.536, -0.461);
        let gammas = [(1999, 2.4), (2009, 1.9)];
        let panel = synthetic_panel(truth.0, truth.1, truth.2, &gammas, |_| 0.0);
        let model = fit_growth_model(&panel).unwrap();
        assert_relative_eq!(model.eci_coef, truth.0, epsilon = 1e-8);
        assert_relative_eq!(model.log_gdppc_coef, truth.1, epsilon = 1e-8);
        assert_relative_eq!(model.interaction_coef, truth.2, epsilon = 1e-8);
        assert_relative_eq!(model.period_effects[&1999], 2.4, epsilon = 1e-8);
        assert_relative_eq!(model.period_effects[&2009], 1.9, epsilon = 1e-8);
        assert!(model.notes.is_empty());
        assert_eq!(model.n_obs, 24);
    }

    #[test]
    fn robust_ses_are_finite_and_nonnegative() {
        let panel = synthetic_panel(
            1.0,
            -1.5,
            -0.4,
            &[(1999, 2.0), (2009, 1.5)],
            |i| 0.3 * (((i * 31) % 17) as f64 / 17.0 - 0.5),
        );
        let model = fit_growth_model(&panel).unwrap();
        for se in [
            model.eci_se,
            model.log_gdppc_se,
            model.interaction_se,
            model.period_ses[&1999],
            model.period_ses[&2009],
        ] {
            assert!(se.is_finite() && se >= 0.0, "bad robust se {se}");
        }
        assert!(model.r2 > 0.0 && model.r2 <= 1.0);
    }

    #[test]
    fn single_period_degrades_with_a_note() {
        let panel = synthetic_panel(1.0, -1.5, -0.4, &[(2009, 1.5)], |i| {
            0.1 * ((i % 7) as f64 - 3.0)
        });
        let model = fit_growth_model(&panel).unwrap();
        assert_eq!(model.period_effects.len(), 1);
        assert!(!model.notes.is_empty());
    }

    #[test]
    fn zero_inputs_predict_the_period_effect() {
        let panel = synthetic_panel(1.0, -1.5, -0.4, &[(1999, 2.0), (2009, 1.5)], |_| 0.0);
        let model = fit_growth_model(&panel).unwrap();
        let g = predict_growth(&model, 0.0, 0.0, None).unwrap();
        assert_relative_eq!(g, model.period_effects[&2009], epsilon = 1e-12);
        let g = predict_growth(&model, 0.0, 0.0, Some(1999)).unwrap();
        assert_relative_eq!(g, model.period_effects[&1999], epsilon = 1e-12);
        assert!(matches!(
            predict_growth(&model, 0.0, 0.0, Some(1980)),
            Err(Error::UnknownPeriod(1980))
        ));
    }

    #[test]
    fn inversion_round_trips_through_prediction() {
        let panel = synthetic_panel(1.073, -1.536, -0.461, &[(1999, 2.0), (2009, 1.5)], |i| {
            0.2 * ((i % 5) as f64 - 2.0)
        });
        let model = fit_growth_model(&panel).unwrap();
        for (eci, z) in [(0.933, 0.4), (-0.2, -1.3), (1.225, 0.0)] {
            let g = predict_growth(&model, eci, z, None).unwrap();
            let back = invert_target_eci(&model, g, z, None).unwrap();
            assert_relative_eq!(back, eci, epsilon = 1e-9);
        }
    }

    #[test]
    fn degenerate_slope_is_refused() {
        let panel = synthetic_panel(1.0, -1.5, -0.5, &[(1999, 2.0), (2009, 1.5)], |_| 0.0);
        let model = fit_growth_model(&panel).unwrap();
        // a1 + a3 z = 0 at z = a1 / 0.5 = 2.
        let z = model.eci_coef / 0.5;
        assert!(matches!(
            invert_target_eci(&model, 3.5, z, None),
            Err(Error::SingularSlope(_))
        ));
    }
}
