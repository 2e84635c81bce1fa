//! Pipeline orchestration and report emission: run configs, the end-to-end
//! run, CSV artifacts, effort-complexity SVG diagrams, the cross-location
//! property panel with quadratic fits, and the run manifest.
//!
//! Output is deterministic: identical configs and inputs produce
//! byte-identical artifacts. Floats are written with Rust's shortest
//! round-trip formatting and all iteration happens in sorted order.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::complexity::{compute_eci_pci, ComplexityScores, SpecializationSnapshot};
use crate::effort::{
    added_volume, benchmark_portfolio, compute_effort, optimize_portfolio, EffortCandidate,
    EffortMatrix, Portfolio, PortfolioMethod,
};
use crate::error::{Error, Result, StageExt};
use crate::forecast::{
    all_year_data, calibrate, predict_future, Regime, SteppingstoneModel,
    SweepEntry, YearData,
};
use crate::growth::{assemble_growth_panel, fit_growth_model, invert_target_eci, predict_growth,
    GrowthModel};
use crate::ingest::{apply_filters, load_macro_csv, load_panel_csv, smooth_moving_average,
    PanelSchema};
use crate::linalg::least_squares;
use crate::matrix::Matrix;
use crate::panel::{FilterRules, MacroSeries, OutputPanel};
use crate::scalar::{lit, to_f64, Scalar};
use crate::stats::{mean, population_variance};

// ---------------------------------------------------------------------------
// Run configuration
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub data: DataSection,
    pub ingest: IngestSection,
    pub model: ModelSection,
    pub target: TargetSection,
    #[serde(default)]
    pub growth: Option<GrowthSection>,
    pub run: RunSection,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct DataSection {
    pub panel_csv: PathBuf,
    /// `trade` or `payroll`.
    pub schema: String,
    #[serde(default)]
    pub macro_csv: Option<PathBuf>,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct IngestSection {
    pub smoothing_window: u32,
    pub filters: FilterRules<f64>,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub base_year: i32,
    pub delta_t: u32,
    pub tau: u32,
}

/// Exactly one of the three target forms must be set.
#[derive(Clone, Debug, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct TargetSection {
    #[serde(default)]
    pub eci_delta: Option<f64>,
    #[serde(default)]
    pub eci_absolute: Option<f64>,
    #[serde(default)]
    pub growth_pct: Option<f64>,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct GrowthSection {
    /// `(start, end)` year pairs for the growth panel.
    pub periods: Vec<(i32, i32)>,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    /// Empty means every location scored in the prediction.
    #[serde(default)]
    pub focal_locations: Vec<String>,
    pub output_dir: PathBuf,
    /// `future` (default) or `current`: which PCI prices candidates.
    #[serde(default = "default_pricing")]
    pub pricing: String,
    #[serde(default = "default_true")]
    pub benchmark: bool,
}

fn default_pricing() -> String {
    "future".to_string()
}

fn default_true() -> bool {
    true
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum TargetSpec {
    EciDelta(f64),
    EciAbsolute(f64),
    GrowthPct(f64),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Pricing {
    FuturePci,
    CurrentPci,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let config: RunConfig = toml::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        self.schema()?;
        self.target_spec()?;
        self.pricing()?;
        if self.model.tau == 0 || self.model.tau >= self.model.delta_t {
            return Err(Error::Config(format!(
                "tau={} must satisfy 0 < tau < delta_t={}",
                self.model.tau, self.model.delta_t
            )));
        }
        if self.ingest.smoothing_window == 0 {
            return Err(Error::Config("smoothing_window must be at least 1".to_string()));
        }
        if matches!(self.target_spec()?, TargetSpec::GrowthPct(_)) {
            if self.data.macro_csv.is_none() {
                return Err(Error::Config(
                    "a growth target needs data.macro_csv for GDP per capita".to_string(),
                ));
            }
            match &self.growth {
                None => {
                    return Err(Error::Config(
                        "a growth target needs a [growth] section with periods".to_string(),
                    ))
                }
                Some(g) if g.periods.is_empty() => {
                    return Err(Error::Config("growth.periods must not be empty".to_string()))
                }
                _ => {}
            }
        }
        Ok(())
    }

    pub fn schema(&self) -> Result<PanelSchema> {
        PanelSchema::parse(&self.data.schema).ok_or_else(|| {
            Error::Config(format!(
                "unknown schema {:?}; expected \"trade\" or \"payroll\"",
                self.data.schema
            ))
        })
    }

    pub fn target_spec(&self) -> Result<TargetSpec> {
        let t = &self.target;
        match (t.eci_delta, t.eci_absolute, t.growth_pct) {
            (Some(d), None, None) => Ok(TargetSpec::EciDelta(d)),
            (None, Some(a), None) => Ok(TargetSpec::EciAbsolute(a)),
            (None, None, Some(g)) => Ok(TargetSpec::GrowthPct(g)),
            _ => Err(Error::Config(
                "exactly one of target.eci_delta, target.eci_absolute, target.growth_pct must be set"
                    .to_string(),
            )),
        }
    }

    pub fn pricing(&self) -> Result<Pricing> {
        match self.run.pricing.as_str() {
            "future" => Ok(Pricing::FuturePci),
            "current" => Ok(Pricing::CurrentPci),
            other => Err(Error::Config(format!(
                "unknown pricing {other:?}; expected \"future\" or \"current\""
            ))),
        }
    }

    /// Output directory, honoring the `ECIOPT_OUTPUT_DIR` override.
    pub fn output_dir(&self) -> PathBuf {
        std::env::var_os("ECIOPT_OUTPUT_DIR")
            .map(PathBuf::from)
            .unwrap_or_else(|| self.run.output_dir.clone())
    }
}

// ---------------------------------------------------------------------------
// Pipeline
// ---------------------------------------------------------------------------

/// Per-location results of a pipeline run.
#[derive(Clone, Debug)]
pub struct LocationOutcome<T> {
    pub location: String,
    pub eci_base: T,
    pub eci_pred: T,
    pub target_eci: T,
    pub predicted_growth_pct: Option<T>,
    pub target_growth_pct: Option<T>,
    pub optimal: Portfolio<T>,
    pub benchmark: Option<Portfolio<T>>,
}

#[derive(Clone, Debug)]
pub struct PipelineOutcome<T> {
    pub out_dir: PathBuf,
    pub locations: Vec<LocationOutcome<T>>,
    pub files: Vec<PathBuf>,
}

impl<T> PipelineOutcome<T> {
    pub fn any_infeasible(&self) -> bool {
        self.locations.iter().any(|l| {
            !l.optimal.feasible
                || l.benchmark.as_ref().map_or(false, |b| !b.feasible)
        })
    }
}

/// Runs the whole pipeline: ingest, complexity, calibration, forecast,
/// optional growth-target inversion, per-location optimization, and report
/// emission. Artifacts land in the configured output directory.
pub fn run_pipeline<T: Scalar>(config: &RunConfig) -> Result<PipelineOutcome<T>> {
    config.validate()?;
    let schema = config.schema()?;
    let target_spec = config.target_spec()?;
    let pricing = config.pricing()?;
    let out_dir = config.output_dir();
    fs::create_dir_all(&out_dir).map_err(|e| Error::io(&out_dir, e))?;
    let mut files = Vec::new();

    // Ingest.
    let raw: OutputPanel<T> =
        load_panel_csv(&config.data.panel_csv, schema).stage("ingest")?;
    let macro_series: Option<MacroSeries<T>> = match &config.data.macro_csv {
        Some(path) => Some(load_macro_csv(path).stage("ingest")?),
        None => None,
    };
    let rules = FilterRules {
        min_location_total: lit(config.ingest.filters.min_location_total),
        min_population: config.ingest.filters.min_population.map(lit),
        min_activity_total: lit(config.ingest.filters.min_activity_total),
    };
    let smoothed = smooth_moving_average(&raw, config.ingest.smoothing_window).stage("ingest")?;
    let panel = apply_filters(&smoothed, macro_series.as_ref(), &rules).stage("ingest")?;

    // Complexity for every year (snapshots feed calibration and history).
    let years = all_year_data(&panel).stage("complexity")?;
    let base_year = config.model.base_year;
    let base = years
        .get(&base_year)
        .ok_or(Error::MissingYear(base_year))
        .stage("complexity")?;
    let base_scores =
        compute_eci_pci::<T>(&base.snapshot.m, &base.snapshot.locations, &base.snapshot.activities)
            .stage("complexity")?;

    // Calibration.
    let entry_model =
        calibrate(&years, config.model.delta_t, config.model.tau, Regime::Entry)
            .stage("calibrate")?;
    let exit_model = calibrate(&years, config.model.delta_t, config.model.tau, Regime::Exit)
        .stage("calibrate")?;
    let models_path = out_dir.join("models.csv");
    write_models_csv(&[entry_model.clone(), exit_model.clone()], &models_path)?;
    files.push(models_path);

    // Forecast.
    let prediction = predict_future(&entry_model, &exit_model, &base.snapshot, &base.relatedness)
        .stage("forecast")?;

    // Growth model when a growth target is requested.
    let growth_model: Option<GrowthModel<T>> = match target_spec {
        TargetSpec::GrowthPct(_) => {
            let periods = &config.growth.as_ref().expect("validated").periods;
            let series = macro_series.as_ref().expect("validated");
            let mut history = BTreeMap::new();
            for &(start, _) in periods {
                let data = years.get(&start).ok_or(Error::MissingYear(start)).stage("growth")?;
                let scores = compute_eci_pci::<T>(
                    &data.snapshot.m,
                    &data.snapshot.locations,
                    &data.snapshot.activities,
                )
                .stage("growth")?;
                history.insert(start, scores);
            }
            let growth_panel =
                assemble_growth_panel(series, &history, periods).stage("growth")?;
            let model = fit_growth_model(&growth_panel).stage("growth")?;
            let path = out_dir.join("growth_model.csv");
            write_growth_model_csv(&model, &path)?;
            files.push(path);
            Some(model)
        }
        _ => None,
    };

    // Focal set: explicit, or every location the prediction can score.
    let focal: Vec<String> = if config.run.focal_locations.is_empty() {
        prediction.eci_pred.keys().cloned().collect()
    } else {
        let mut sorted = config.run.focal_locations.clone();
        sorted.sort();
        sorted.dedup();
        for location in &sorted {
            if base.snapshot.location_pos(location).is_none() {
                return Err(Error::UnknownLocation(location.clone()));
            }
        }
        sorted
    };

    let base_eci_map = base_scores.eci_map();
    let current_pci_map = base_scores.pci_map();

    let mut outcomes = Vec::new();
    let mut property_rows: Vec<PropertyRow<T>> = Vec::new();
    for location in &focal {
        let effort_future = compute_effort(
            location,
            &entry_model,
            &base.snapshot,
            &base.relatedness,
            &prediction,
        )
        .stage("effort")?;
        let effort = match pricing {
            Pricing::FuturePci => effort_future,
            Pricing::CurrentPci => reprice_effort(&effort_future, &current_pci_map)
                .stage("effort")?,
        };

        let eci_base = *base_eci_map.get(location).ok_or_else(|| {
            Error::Degenerate(format!(
                "focal location {location:?} is outside the scored component at {base_year}"
            ))
        })?;
        let eci_pred = *prediction
            .eci_pred
            .get(location)
            .ok_or_else(|| Error::EmptyBaseline(location.clone()))?;

        let (target_eci, predicted_growth, target_growth) = match target_spec {
            TargetSpec::EciDelta(delta) => (eci_base + lit(delta), None, None),
            TargetSpec::EciAbsolute(value) => (lit(value), None, None),
            TargetSpec::GrowthPct(goal) => {
                let model = growth_model.as_ref().expect("validated");
                let series = macro_series.as_ref().expect("validated");
                let row = series.get(location, base_year).ok_or(Error::MissingMacro {
                    location: location.clone(),
                    year: base_year,
                })?;
                let z = model.latest_z(row.gdp_pc_ppp.ln());
                let predicted = predict_growth(model, eci_pred, z, None).stage("growth")?;
                let target = invert_target_eci(model, lit(goal), z, None).stage("growth")?;
                (target, Some(predicted), Some(lit::<T>(goal)))
            }
        };

        let optimal = optimize_portfolio(&effort, target_eci).stage("optimize")?;
        let benchmark = if config.run.benchmark {
            let c = base
                .snapshot
                .location_pos(location)
                .expect("focal checked against snapshot");
            let omega_of: BTreeMap<String, T> = base
                .snapshot
                .activities
                .iter()
                .enumerate()
                .map(|(p, a)| (a.clone(), base.relatedness.omega[(c, p)]))
                .collect();
            Some(benchmark_portfolio(&effort, &omega_of, target_eci).stage("benchmark")?)
        } else {
            None
        };

        // Per-location artifacts.
        let tag = safe_name(location);
        let selected: BTreeSet<String> = optimal
            .selected
            .iter()
            .map(|c| c.activity.clone())
            .collect();
        let diagram_csv = out_dir.join(format!("effort_diagram_{tag}.csv"));
        write_effort_diagram_csv(&effort, &selected, &diagram_csv)?;
        files.push(diagram_csv);
        let diagram_svg = out_dir.join(format!("effort_diagram_{tag}.svg"));
        let points: Vec<DiagramPoint<T>> = effort
            .candidates
            .iter()
            .map(|c| DiagramPoint {
                activity: c.activity.clone(),
                w: c.w,
                pci_future: c.pci_future,
                selected: selected.contains(&c.activity),
            })
            .collect();
        emit_diagram_svg(&points, &diagram_svg)?;
        files.push(diagram_svg);

        let portfolio_path = out_dir.join(format!("portfolio_{tag}_optimal.csv"));
        write_portfolio_csv(&optimal, &effort, &portfolio_path)?;
        files.push(portfolio_path);
        if let Some(bench) = &benchmark {
            let path = out_dir.join(format!("portfolio_{tag}_benchmark.csv"));
            write_portfolio_csv(bench, &effort, &path)?;
            files.push(path);
        }

        // Property rows for both methods.
        for portfolio in std::iter::once(&optimal).chain(benchmark.iter()) {
            property_rows.push(property_row(
                portfolio,
                &base.snapshot,
                &base.relatedness,
                eci_base,
                &panel,
                base_year,
            )?);
        }

        outcomes.push(LocationOutcome {
            location: location.clone(),
            eci_base,
            eci_pred,
            target_eci,
            predicted_growth_pct: predicted_growth,
            target_growth_pct: target_growth,
            optimal,
            benchmark,
        });
    }

    let panel_struct = PropertyPanel::build(property_rows);
    let rows_path = out_dir.join("property_panel.csv");
    write_property_panel_csv(&panel_struct, &rows_path)?;
    files.push(rows_path);
    let fits_path = out_dir.join("property_fits.csv");
    write_property_fits_csv(&panel_struct, &fits_path)?;
    files.push(fits_path);

    let manifest_path = out_dir.join("run_manifest.toml");
    write_run_manifest(config, &manifest_path)?;
    files.push(manifest_path);

    Ok(PipelineOutcome {
        out_dir,
        locations: outcomes,
        files,
    })
}

/// Replaces future PCI with the supplied (current-year) PCI on both the
/// candidates and the baseline; candidates without a current score move to
/// the unpriced list.
pub fn reprice_effort<T: Scalar>(
    effort: &EffortMatrix<T>,
    pci_map: &BTreeMap<String, T>,
) -> Result<EffortMatrix<T>> {
    let mut baseline = Vec::with_capacity(effort.baseline.len());
    for (activity, _) in &effort.baseline {
        let pci = pci_map.get(activity).copied().ok_or_else(|| {
            Error::Degenerate(format!(
                "baseline activity {activity:?} has no current PCI"
            ))
        })?;
        baseline.push((activity.clone(), pci));
    }
    let mut candidates = Vec::new();
    let mut unpriced = effort.unpriced.clone();
    for c in &effort.candidates {
        match pci_map.get(&c.activity) {
            Some(&pci) => candidates.push(EffortCandidate {
                activity: c.activity.clone(),
                w: c.w,
                pci_future: pci,
            }),
            None => unpriced.push(c.activity.clone()),
        }
    }
    unpriced.sort();
    unpriced.dedup();
    let mut sum = T::zero();
    for (_, pci) in &baseline {
        sum += *pci;
    }
    let eci_baseline = sum / lit(baseline.len() as f64);
    Ok(EffortMatrix {
        location: effort.location.clone(),
        candidates,
        baseline,
        eci_baseline,
        unpriced,
    })
}

// ---------------------------------------------------------------------------
// Sequential targets
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, PartialEq)]
pub struct SequentialEntry<T> {
    pub activity: String,
    /// First target at which the optimizer selects this activity.
    pub first_target: T,
    pub w: T,
    pub pci_future: T,
}

/// Solves the portfolio at each ascending target and annotates every
/// selected activity with the first target that includes it; activities
/// never selected are omitted. Rows are ordered by first target, then
/// effort, then id.
pub fn sequential_targets<T: Scalar>(
    effort: &EffortMatrix<T>,
    targets: &[T],
) -> Result<Vec<SequentialEntry<T>>> {
    if targets.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Config(
            "sequential targets must be strictly ascending".to_string(),
        ));
    }
    let mut first_seen: BTreeMap<String, (T, T, T)> = BTreeMap::new();
    for &target in targets {
        let portfolio = optimize_portfolio(effort, target)?;
        for selected in &portfolio.selected {
            first_seen
                .entry(selected.activity.clone())
                .or_insert((target, selected.w, selected.pci_future));
        }
    }
    let mut rows: Vec<SequentialEntry<T>> = first_seen
        .into_iter()
        .map(|(activity, (first_target, w, pci_future))| SequentialEntry {
            activity,
            first_target,
            w,
            pci_future,
        })
        .collect();
    rows.sort_by(|a, b| {
        a.first_target
            .partial_cmp(&b.first_target)
            .expect("finite targets")
            .then(a.w.partial_cmp(&b.w).expect("finite efforts"))
            .then_with(|| a.activity.cmp(&b.activity))
    });
    Ok(rows)
}

pub fn write_sequential_csv<T: Scalar>(rows: &[SequentialEntry<T>], path: &Path) -> Result<()> {
    let mut out = String::from("activity,first_target_eci,w,pci_future\n");
    for row in rows {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            csv_escape(&row.activity),
            to_f64(row.first_target),
            to_f64(row.w),
            to_f64(row.pci_future)
        );
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

// ---------------------------------------------------------------------------
// Quadratic fits and the property panel
// ---------------------------------------------------------------------------

/// Least-squares coefficients of `y = c0 + c1 x + c2 x^2`.
pub fn quadratic_fit<T: Scalar>(xs: &[T], ys: &[T]) -> Result<(T, T, T)> {
    assert_eq!(xs.len(), ys.len());
    let mut distinct: Vec<T> = xs.to_vec();
    distinct.sort_by(|a, b| a.partial_cmp(b).expect("finite x"));
    distinct.dedup();
    if distinct.len() < 3 {
        return Err(Error::RankDeficient);
    }
    let design = Matrix::from_fn(xs.len(), 3, |r, c| match c {
        0 => T::one(),
        1 => xs[r],
        _ => xs[r] * xs[r],
    });
    let fit = least_squares(&design, ys)?;
    Ok((fit.coefficients[0], fit.coefficients[1], fit.coefficients[2]))
}

#[derive(Clone, Debug)]
pub struct PropertyRow<T> {
    pub location: String,
    pub method: PortfolioMethod,
    pub eci_t: T,
    pub diversity_t: u32,
    pub mean_rca_suggested: Option<T>,
    pub mean_rel_relatedness: Option<T>,
    pub var_rel_relatedness: Option<T>,
    pub count_suggested: usize,
    pub added_volume_usd: T,
}

#[derive(Clone, Debug)]
pub struct SeriesFit<T> {
    pub series: &'static str,
    pub method: PortfolioMethod,
    pub c0: T,
    pub c1: T,
    pub c2: T,
    pub n_points: usize,
}

/// Cross-location property analytics with one quadratic fit per series and
/// method (fits are skipped when fewer than three distinct x values exist).
#[derive(Clone, Debug)]
pub struct PropertyPanel<T> {
    pub rows: Vec<PropertyRow<T>>,
    pub fits: Vec<SeriesFit<T>>,
}

impl<T: Scalar> PropertyPanel<T> {
    pub fn build(rows: Vec<PropertyRow<T>>) -> Self {
        let mut fits = Vec::new();
        for method in [PortfolioMethod::Optimal, PortfolioMethod::Benchmark] {
            let of_method: Vec<&PropertyRow<T>> =
                rows.iter().filter(|r| r.method == method).collect();
            if of_method.is_empty() {
                continue;
            }
            let series: [(&'static str, Vec<(T, T)>); 5] = [
                (
                    "mean_rca_vs_eci",
                    of_method
                        .iter()
                        .filter_map(|r| r.mean_rca_suggested.map(|y| (r.eci_t, y)))
                        .collect(),
                ),
                (
                    "mean_rel_relatedness_vs_eci",
                    of_method
                        .iter()
                        .filter_map(|r| r.mean_rel_relatedness.map(|y| (r.eci_t, y)))
                        .collect(),
                ),
                (
                    "var_rel_relatedness_vs_eci",
                    of_method
                        .iter()
                        .filter_map(|r| r.var_rel_relatedness.map(|y| (r.eci_t, y)))
                        .collect(),
                ),
                (
                    "count_vs_diversity",
                    of_method
                        .iter()
                        .map(|r| (lit(r.diversity_t as f64), lit(r.count_suggested as f64)))
                        .collect(),
                ),
                (
                    "added_volume_vs_diversity",
                    of_method
                        .iter()
                        .map(|r| (lit(r.diversity_t as f64), r.added_volume_usd))
                        .collect(),
                ),
            ];
            for (name, points) in series {
                let xs: Vec<T> = points.iter().map(|(x, _)| *x).collect();
                let ys: Vec<T> = points.iter().map(|(_, y)| *y).collect();
                if let Ok((c0, c1, c2)) = quadratic_fit(&xs, &ys) {
                    fits.push(SeriesFit {
                        series: name,
                        method,
                        c0,
                        c1,
                        c2,
                        n_points: xs.len(),
                    });
                }
            }
        }
        Self { rows, fits }
    }
}

fn property_row<T: Scalar>(
    portfolio: &Portfolio<T>,
    snapshot: &SpecializationSnapshot<T>,
    relatedness: &crate::complexity::RelatednessField<T>,
    eci_base: T,
    panel: &OutputPanel<T>,
    year: i32,
) -> Result<PropertyRow<T>> {
    let c = snapshot
        .location_pos(&portfolio.location)
        .ok_or_else(|| Error::UnknownLocation(portfolio.location.clone()))?;
    let mut rcas = Vec::new();
    let mut rels = Vec::new();
    for selected in &portfolio.selected {
        if let Some(p) = snapshot.activity_pos(&selected.activity) {
            rcas.push(snapshot.rca[(c, p)]);
            rels.push(relatedness.omega_rel[(c, p)]);
        }
    }
    let volume = added_volume(portfolio, panel, year)?;
    Ok(PropertyRow {
        location: portfolio.location.clone(),
        method: portfolio.method,
        eci_t: eci_base,
        diversity_t: snapshot.diversity[c],
        mean_rca_suggested: (!rcas.is_empty()).then(|| mean(&rcas)),
        mean_rel_relatedness: (!rels.is_empty()).then(|| mean(&rels)),
        var_rel_relatedness: (!rels.is_empty()).then(|| population_variance(&rels)),
        count_suggested: portfolio.selected.len(),
        added_volume_usd: volume,
    })
}

// ---------------------------------------------------------------------------
// CSV writers
// ---------------------------------------------------------------------------

fn csv_escape(field: &str) -> String {
    if field.contains(',') || field.contains('"') || field.contains('\n') {
        format!("\"{}\"", field.replace('"', "\"\""))
    } else {
        field.to_string()
    }
}

fn opt_to_string<T: Scalar>(v: Option<T>) -> String {
    v.map(|x| to_f64(x).to_string()).unwrap_or_default()
}

pub fn write_models_csv<T: Scalar>(models: &[SteppingstoneModel<T>], path: &Path) -> Result<()> {
    let mut out = String::from(
        "regime,delta_t,tau,b0,b1,b2,b3,b4,se0,se1,se2,se3,se4,r2,n_obs,start_years\n",
    );
    for m in models {
        let b: Vec<String> = m.coefficients.iter().map(|v| to_f64(*v).to_string()).collect();
        let se: Vec<String> = m.std_errors.iter().map(|v| to_f64(*v).to_string()).collect();
        let years: Vec<String> = m.start_years.iter().map(i32::to_string).collect();
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            m.regime.as_str(),
            m.delta_t,
            m.tau,
            b.join(","),
            se.join(","),
            to_f64(m.r2),
            m.n_obs,
            years.join(";")
        );
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn write_sweep_csv<T: Scalar>(entries: &[SweepEntry<T>], path: &Path) -> Result<()> {
    let mut out =
        String::from("delta_t,tau,regime,coefficient,value,se,p_value,n_obs,n_start_years\n");
    for e in entries {
        for (regime, model) in [("entry", &e.entry), ("exit", &e.exit)] {
            for j in 0..5 {
                let _ = writeln!(
                    out,
                    "{},{},{regime},b{j},{},{},{},{},{}",
                    e.delta_t,
                    e.tau,
                    to_f64(model.coefficients[j]),
                    to_f64(model.std_errors[j]),
                    to_f64(model.p_values[j]),
                    model.n_obs,
                    model.start_years.len()
                );
            }
            let _ = writeln!(
                out,
                "{},{},{regime},r2,{},,,{},{}",
                e.delta_t,
                e.tau,
                to_f64(model.r2),
                model.n_obs,
                model.start_years.len()
            );
        }
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn write_rca_csv<T: Scalar>(snapshot: &SpecializationSnapshot<T>, path: &Path) -> Result<()> {
    let mut out = String::from("location,activity,rca\n");
    for (c, location) in snapshot.locations.iter().enumerate() {
        for (p, activity) in snapshot.activities.iter().enumerate() {
            let _ = writeln!(
                out,
                "{},{},{}",
                csv_escape(location),
                csv_escape(activity),
                to_f64(snapshot.rca[(c, p)])
            );
        }
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn write_complexity_csv<T: Scalar>(scores: &ComplexityScores<T>, path: &Path) -> Result<()> {
    let mut out = String::from("kind,id,score\n");
    for (location, eci) in scores.locations.iter().zip(&scores.eci) {
        let _ = writeln!(out, "eci,{},{}", csv_escape(location), to_f64(*eci));
    }
    for (activity, pci) in scores.activities.iter().zip(&scores.pci) {
        let _ = writeln!(out, "pci,{},{}", csv_escape(activity), to_f64(*pci));
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn write_proximity_csv<T: Scalar>(
    activities: &[String],
    phi: &Matrix<T>,
    path: &Path,
) -> Result<()> {
    let mut out = String::from("activity,other,phi\n");
    for p in 0..activities.len() {
        for q in p..activities.len() {
            let _ = writeln!(
                out,
                "{},{},{}",
                csv_escape(&activities[p]),
                csv_escape(&activities[q]),
                to_f64(phi[(p, q)])
            );
        }
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Portfolio rows in ascending effort order with the running average PCI
/// after each inclusion.
pub fn write_portfolio_csv<T: Scalar>(
    portfolio: &Portfolio<T>,
    effort: &EffortMatrix<T>,
    path: &Path,
) -> Result<()> {
    let mut rows: Vec<&EffortCandidate<T>> = portfolio.selected.iter().collect();
    rows.sort_by(|a, b| {
        a.w.partial_cmp(&b.w)
            .expect("finite efforts")
            .then_with(|| a.activity.cmp(&b.activity))
    });
    let mut baseline_sum = T::zero();
    for (_, pci) in &effort.baseline {
        baseline_sum += *pci;
    }
    let mut out = String::from("activity,w,pci_future,cumulative_eci\n");
    let mut sum = baseline_sum;
    let mut count = effort.baseline.len();
    for row in rows {
        sum += row.pci_future;
        count += 1;
        let _ = writeln!(
            out,
            "{},{},{},{}",
            csv_escape(&row.activity),
            to_f64(row.w),
            to_f64(row.pci_future),
            to_f64(sum / lit::<T>(count as f64))
        );
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn write_effort_diagram_csv<T: Scalar>(
    effort: &EffortMatrix<T>,
    selected: &BTreeSet<String>,
    path: &Path,
) -> Result<()> {
    let mut out = String::from("activity,w,pci_future,selected\n");
    for c in &effort.candidates {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            csv_escape(&c.activity),
            to_f64(c.w),
            to_f64(c.pci_future),
            selected.contains(&c.activity)
        );
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn write_growth_model_csv<T: Scalar>(model: &GrowthModel<T>, path: &Path) -> Result<()> {
    let mut out = String::from("term,estimate,robust_se\n");
    let _ = writeln!(out, "eci,{},{}", to_f64(model.eci_coef), to_f64(model.eci_se));
    let _ = writeln!(
        out,
        "log_gdppc_z,{},{}",
        to_f64(model.log_gdppc_coef),
        to_f64(model.log_gdppc_se)
    );
    let _ = writeln!(
        out,
        "eci_x_log_gdppc_z,{},{}",
        to_f64(model.interaction_coef),
        to_f64(model.interaction_se)
    );
    for (period, effect) in &model.period_effects {
        let _ = writeln!(
            out,
            "period_{period},{},{}",
            to_f64(*effect),
            to_f64(model.period_ses[period])
        );
    }
    let _ = writeln!(out, "r2,{},", to_f64(model.r2));
    let _ = writeln!(out, "n_obs,{},", model.n_obs);
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn write_property_panel_csv<T: Scalar>(panel: &PropertyPanel<T>, path: &Path) -> Result<()> {
    let mut out = String::from(
        "location,method,eci_t,diversity_t,mean_rca_suggested,mean_rel_relatedness,var_rel_relatedness,count_suggested,added_volume_usd\n",
    );
    for r in &panel.rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            csv_escape(&r.location),
            r.method.as_str(),
            to_f64(r.eci_t),
            r.diversity_t,
            opt_to_string(r.mean_rca_suggested),
            opt_to_string(r.mean_rel_relatedness),
            opt_to_string(r.var_rel_relatedness),
            r.count_suggested,
            to_f64(r.added_volume_usd)
        );
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn write_property_fits_csv<T: Scalar>(panel: &PropertyPanel<T>, path: &Path) -> Result<()> {
    let mut out = String::from("series,method,c0,c1,c2,n_points\n");
    for f in &panel.fits {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            f.series,
            f.method.as_str(),
            to_f64(f.c0),
            to_f64(f.c1),
            to_f64(f.c2),
            f.n_points
        );
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

// ---------------------------------------------------------------------------
// SVG diagram
// ---------------------------------------------------------------------------

#[derive(Clone, Debug)]
pub struct DiagramPoint<T> {
    pub activity: String,
    pub w: T,
    pub pci_future: T,
    pub selected: bool,
}

const SVG_WIDTH: f64 = 640.0;
const SVG_HEIGHT: f64 = 480.0;
const MARGIN_LEFT: f64 = 64.0;
const MARGIN_RIGHT: f64 = 20.0;
const MARGIN_TOP: f64 = 20.0;
const MARGIN_BOTTOM: f64 = 52.0;

/// Writes a standalone SVG 1.1 effort-complexity scatter; selected
/// candidates are highlighted. Output is deterministic for identical input.
pub fn emit_diagram_svg<T: Scalar>(points: &[DiagramPoint<T>], path: &Path) -> Result<()> {
    if points.is_empty() {
        return Err(Error::Degenerate(
            "effort diagram needs at least one point".to_string(),
        ));
    }
    let xs: Vec<f64> = points.iter().map(|p| to_f64(p.w)).collect();
    let ys: Vec<f64> = points.iter().map(|p| to_f64(p.pci_future)).collect();
    let finite = |v: &f64| v.is_finite();
    let x_max = xs.iter().filter(|v| finite(v)).cloned().fold(0.0, f64::max);
    let y_min = ys.iter().cloned().fold(f64::INFINITY, f64::min);
    let y_max = ys.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let x_span = if x_max > 0.0 { x_max * 1.05 } else { 1.0 };
    let (y_lo, y_span) = {
        let pad = ((y_max - y_min) * 0.08).max(1e-9);
        (y_min - pad, (y_max - y_min) + 2.0 * pad)
    };

    let plot_w = SVG_WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let plot_h = SVG_HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
    let sx = |x: f64| MARGIN_LEFT + (x / x_span).clamp(0.0, 1.0) * plot_w;
    let sy = |y: f64| MARGIN_TOP + (1.0 - ((y - y_lo) / y_span).clamp(0.0, 1.0)) * plot_h;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"{SVG_WIDTH}\" height=\"{SVG_HEIGHT}\" viewBox=\"0 0 {SVG_WIDTH} {SVG_HEIGHT}\">"
    );
    let _ = writeln!(
        svg,
        "  <rect x=\"0\" y=\"0\" width=\"{SVG_WIDTH}\" height=\"{SVG_HEIGHT}\" fill=\"white\"/>"
    );
    // Axes.
    let x0 = MARGIN_LEFT;
    let y0 = MARGIN_TOP + plot_h;
    let _ = writeln!(
        svg,
        "  <line x1=\"{x0:.2}\" y1=\"{y0:.2}\" x2=\"{:.2}\" y2=\"{y0:.2}\" stroke=\"black\" stroke-width=\"1\"/>",
        MARGIN_LEFT + plot_w
    );
    let _ = writeln!(
        svg,
        "  <line x1=\"{x0:.2}\" y1=\"{:.2}\" x2=\"{x0:.2}\" y2=\"{y0:.2}\" stroke=\"black\" stroke-width=\"1\"/>",
        MARGIN_TOP
    );
    // Ticks and labels.
    for i in 0..=4 {
        let fx = i as f64 / 4.0;
        let x_value = fx * x_span;
        let px = sx(x_value);
        let _ = writeln!(
            svg,
            "  <line x1=\"{px:.2}\" y1=\"{y0:.2}\" x2=\"{px:.2}\" y2=\"{:.2}\" stroke=\"black\" stroke-width=\"1\"/>",
            y0 + 4.0
        );
        let _ = writeln!(
            svg,
            "  <text x=\"{px:.2}\" y=\"{:.2}\" font-size=\"11\" text-anchor=\"middle\" font-family=\"sans-serif\">{x_value:.2}</text>",
            y0 + 16.0
        );
        let y_value = y_lo + fx * y_span;
        let py = sy(y_value);
        let _ = writeln!(
            svg,
            "  <line x1=\"{:.2}\" y1=\"{py:.2}\" x2=\"{x0:.2}\" y2=\"{py:.2}\" stroke=\"black\" stroke-width=\"1\"/>",
            x0 - 4.0
        );
        let _ = writeln!(
            svg,
            "  <text x=\"{:.2}\" y=\"{:.2}\" font-size=\"11\" text-anchor=\"end\" font-family=\"sans-serif\">{y_value:.2}</text>",
            x0 - 7.0,
            py + 3.5
        );
    }
    let _ = writeln!(
        svg,
        "  <text x=\"{:.2}\" y=\"{:.2}\" font-size=\"13\" text-anchor=\"middle\" font-family=\"sans-serif\">Effort W (added RCA at the steppingstone)</text>",
        MARGIN_LEFT + plot_w / 2.0,
        SVG_HEIGHT - 12.0
    );
    let _ = writeln!(
        svg,
        "  <text x=\"16\" y=\"{:.2}\" font-size=\"13\" text-anchor=\"middle\" font-family=\"sans-serif\" transform=\"rotate(-90 16 {:.2})\">Future PCI</text>",
        MARGIN_TOP + plot_h / 2.0,
        MARGIN_TOP + plot_h / 2.0
    );
    // Unselected first so highlighted marks stay on top.
    for pass in [false, true] {
        for (point, (x, y)) in points.iter().zip(xs.iter().zip(&ys)) {
            if point.selected != pass || !x.is_finite() {
                continue;
            }
            let (fill, r) = if point.selected {
                ("#1f77b4", 4.0)
            } else {
                ("#c9c9c9", 3.0)
            };
            let _ = writeln!(
                svg,
                "  <circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"{r}\" fill=\"{fill}\"><title>{}</title></circle>",
                sx(*x),
                sy(*y),
                xml_escape(&point.activity)
            );
        }
    }
    let _ = writeln!(svg, "</svg>");
    fs::write(path, svg).map_err(|e| Error::io(path, e))
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

// ---------------------------------------------------------------------------
// Run manifest
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct ManifestInput {
    path: String,
    sha256: String,
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    inputs: Vec<ManifestInput>,
    config: &'a RunConfig,
}

fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut hasher = Sha256::new();
    hasher.update(&bytes);
    Ok(format!("{:x}", hasher.finalize()))
}

pub fn write_run_manifest(config: &RunConfig, path: &Path) -> Result<()> {
    let mut inputs = vec![ManifestInput {
        path: config.data.panel_csv.display().to_string(),
        sha256: sha256_file(&config.data.panel_csv)?,
    }];
    if let Some(macro_csv) = &config.data.macro_csv {
        inputs.push(ManifestInput {
            path: macro_csv.display().to_string(),
            sha256: sha256_file(macro_csv)?,
        });
    }
    let manifest = Manifest {
        tool: "eciopt",
        version: env!("CARGO_PKG_VERSION"),
        inputs,
        config,
    };
    let text = toml::to_string(&manifest)
        .map_err(|e| Error::Config(format!("manifest serialization: {e}")))?;
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn safe_name(id: &str) -> String {
    id.chars()
        .map(|c| if c.is_ascii_alphanumeric() { c } else { '_' })
        .collect()
}

// Re-exported for the CLI: year data pairs used by several subcommands.
pub use crate::forecast::YearMap;

/// Convenience wrapper for CLI subcommands that need year data.
pub fn year_data<T: Scalar>(panel: &OutputPanel<T>) -> Result<BTreeMap<i32, YearData<T>>> {
    all_year_data(panel)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn quadratic_fit_examples() {
        let xs: Vec<f64> = (0..10).map(f64::from).collect();
        let ys: Vec<f64> = xs.iter().map(|x| x * x).collect();
        let (c0, c1, c2) = quadratic_fit(&xs, &ys).unwrap();
        assert_relative_eq!(c0, 0.0, epsilon = 1e-9);
        assert_relative_eq!(c1, 0.0, epsilon = 1e-9);
        assert_relative_eq!(c2, 1.0, epsilon = 1e-9);

        let flat = vec![3.5; 10];
        let (c0, c1, c2) = quadratic_fit(&xs, &flat).unwrap();
        assert_relative_eq!(c0, 3.5, epsilon = 1e-9);
        assert_relative_eq!(c1, 0.0, epsilon = 1e-9);
        assert_relative_eq!(c2, 0.0, epsilon = 1e-9);

        let two_distinct = vec![1.0, 1.0, 2.0];
        assert!(matches!(
            quadratic_fit(&two_distinct, &[1.0, 1.0, 2.0]),
            Err(Error::RankDeficient)
        ));
    }

    #[test]
    fn svg_contains_all_marks() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("diagram.svg");
        let points = vec![
            DiagramPoint {
                activity: "a".to_string(),
                w: 0.5,
                pci_future: 1.0,
                selected: true,
            },
            DiagramPoint {
                activity: "b".to_string(),
                w: 1.5,
                pci_future: -0.5,
                selected: false,
            },
            DiagramPoint {
                activity: "c".to_string(),
                w: 0.9,
                pci_future: 0.2,
                selected: false,
            },
        ];
        emit_diagram_svg(&points, &path).unwrap();
        let svg = fs::read_to_string(&path).unwrap();
        assert_eq!(svg.matches("<circle").count(), 3);
        assert_eq!(svg.matches("#1f77b4").count(), 1);
        assert!(svg.starts_with("<svg"));

        // Empty selection: no highlighted marks.
        let none: Vec<DiagramPoint<f64>> = points
            .into_iter()
            .map(|p| DiagramPoint {
                selected: false,
                ..p
            })
            .collect();
        emit_diagram_svg(&none, &path).unwrap();
        let svg = fs::read_to_string(&path).unwrap();
        assert_eq!(svg.matches("#1f77b4").count(), 0);
        assert_eq!(svg.matches("<circle").count(), 3);
    }

    fn config_toml(target_lines: &str) -> String {
        format!(
            r#"
[data]
panel_csv = "trade.csv"
schema = "trade"
[ingest]
smoothing_window = 4
[ingest.filters]
min_location_total = 0.0
min_activity_total = 0.0
[model]
base_year = 2022
delta_t = 10
tau = 5
[target]
{target_lines}
[run]
output_dir = "out"
"#
        )
    }

    #[test]
    fn config_requires_exactly_one_target() {
        let two: RunConfig =
            toml::from_str(&config_toml("eci_delta = 0.1\neci_absolute = 1.2")).unwrap();
        assert!(matches!(two.validate(), Err(Error::Config(_))));

        let one: RunConfig = toml::from_str(&config_toml("eci_delta = 0.1")).unwrap();
        one.validate().unwrap();
        assert_eq!(one.target_spec().unwrap(), TargetSpec::EciDelta(0.1));
        assert_eq!(one.pricing().unwrap(), Pricing::FuturePci);
    }

    #[test]
    fn growth_target_needs_macro_and_periods() {
        let toml_text = r#"
            [data]
            panel_csv = "trade.csv"
            schema = "trade"
            [ingest]
            smoothing_window = 4
            [ingest.filters]
            min_location_total = 0.0
            min_activity_total = 0.0
            [model]
            base_year = 2022
            delta_t = 10
            tau = 5
            [target]
            growth_pct = 3.5
            [run]
            output_dir = "out"
        "#;
        let config: RunConfig = toml::from_str(toml_text).unwrap();
        assert!(matches!(config.validate(), Err(Error::Config(_))));
    }
}
