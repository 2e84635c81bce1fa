//! Economic-complexity analytics and diversification optimization.
//!
//! The crate covers the full pipeline from raw output panels to portfolio
//! recommendations:
//!
//! - [`ingest`]: load, smooth, filter and persist location x activity x year
//!   output panels plus GDP/population series.
//! - [`complexity`]: RCA and specialization matrices, ECI/PCI scores,
//!   proximity and relatedness density for a single year.
//! - [`forecast`]: steppingstone entry/exit regressions, coefficient
//!   averaging across start years, timing sweeps, and predicted future
//!   specialization matrices with future PCI.
//! - [`effort`]: inversion of the entry model into per-activity effort, the
//!   exact minimum-effort portfolio solver with its exhaustive oracle, and
//!   the relatedness-complexity benchmark.
//! - [`growth`]: the panel growth regression and its inversion from a growth
//!   target to a target ECI.
//! - [`report`]: run configs, the end-to-end pipeline, CSV/SVG artifacts and
//!   cross-location property analytics.
//! - [`synth`]: a seeded synthetic data generator for demos and tests.
//!
//! Numeric kernels are generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below pin the `f64` instantiations used by the CLI.

pub mod complexity;
pub mod effort;
pub mod error;
pub mod forecast;
pub mod growth;
pub mod ingest;
pub mod linalg;
pub mod matrix;
pub mod panel;
pub mod report;
pub mod scalar;
pub mod stats;
pub mod synth;

pub use error::{Error, ErrorCategory, Result};
pub use scalar::Scalar;

pub type OutputPanel = panel::OutputPanel<f64>;
pub type MacroSeries = panel::MacroSeries<f64>;
pub type FilterRules = panel::FilterRules<f64>;
pub type SpecializationSnapshot = complexity::SpecializationSnapshot<f64>;
pub type ComplexityScores = complexity::ComplexityScores<f64>;
pub type RelatednessField = complexity::RelatednessField<f64>;
pub type SteppingstoneModel = forecast::SteppingstoneModel<f64>;
pub type FuturePrediction = forecast::FuturePrediction<f64>;
pub type EffortMatrix = effort::EffortMatrix<f64>;
pub type Portfolio = effort::Portfolio<f64>;
pub type GrowthModel = growth::GrowthModel<f64>;
pub type PipelineOutcome = report::PipelineOutcome<f64>;
