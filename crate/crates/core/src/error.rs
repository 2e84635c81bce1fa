//! Crate-wide error type.
//!
//! Errors are split into two coarse categories so the CLI can map them to
//! exit codes: configuration problems (bad flags, inconsistent run configs)
//! and data problems (malformed inputs, degenerate matrices, failed fits).

use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Coarse classification used for process exit codes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ErrorCategory {
    Config,
    Data,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("config: {0}")]
    Config(String),

    #[error("unknown location {0:?}")]
    UnknownLocation(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: expected header {expected:?}, found {found:?}")]
    CsvHeader {
        path: PathBuf,
        expected: String,
        found: String,
    },

    #[error("{path}:{line}: {msg}")]
    MalformedRow {
        path: PathBuf,
        line: u64,
        msg: String,
    },

    #[error("{path}: no data rows")]
    EmptyInput { path: PathBuf },

    #[error("duplicate key ({location}, {activity}, {year})")]
    DuplicateKey {
        location: String,
        activity: String,
        year: i32,
    },

    #[error("negative value at ({location}, {activity}, {year})")]
    NegativeValue {
        location: String,
        activity: String,
        year: i32,
    },

    #[error("invalid id {id:?}: {reason}")]
    InvalidId { id: String, reason: String },

    #[error("operation requires a {expected} panel, got {found}")]
    WrongProvenance { expected: String, found: String },

    #[error("smoothing window {window} exceeds the {span}-year span of the panel")]
    WindowTooLarge { window: u32, span: u32 },

    #[error("macro series missing ({location}, {year}) while a population rule is active")]
    MissingMacro { location: String, year: i32 },

    #[error("macro series row ({location}, {year}): {msg}")]
    MacroInvalid {
        location: String,
        year: i32,
        msg: String,
    },

    #[error("{path}: unsupported panel format version {found:?}")]
    FormatVersion { path: PathBuf, found: String },

    #[error("{path}: {msg}")]
    Corrupt { path: PathBuf, msg: String },

    #[error("year {0} not present in panel")]
    MissingYear(i32),

    #[error("zero total for {id:?} in year {year}; upstream filters should have removed it")]
    ZeroTotal { id: String, year: i32 },

    #[error("location {0:?} holds no activities")]
    EmptyMatrixRow(String),

    #[error("activity {0:?} is held by no location")]
    EmptyMatrixColumn(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("eigendecomposition did not converge after {sweeps} sweeps")]
    EigenFailed { sweeps: usize },

    #[error("design matrix is rank deficient")]
    RankDeficient,

    #[error("too few observations: need at least {needed}, got {got}")]
    TooFewRows { needed: usize, got: usize },

    #[error("inconsistent models: {0}")]
    MixedModels(String),

    #[error("no feasible (delta_t, tau) pair in the requested ranges")]
    EmptySweep,

    #[error("no feasible start year for delta_t={delta_t}, tau={tau}")]
    NoStartYears { delta_t: u32, tau: u32 },

    #[error("no {regime} cells at start year {start_year}")]
    EmptyRegime { regime: String, start_year: i32 },

    #[error("entry-model steppingstone coefficient must be positive, got {0}")]
    NonpositiveSlope(f64),

    #[error("candidate {activity:?} has effort {w} but is not a predicted entrant")]
    EffortInconsistency { activity: String, w: f64 },

    #[error("location {0:?} has an empty predicted baseline")]
    EmptyBaseline(String),

    #[error("{count} candidates exceed the exhaustive-enumeration cap of {cap}")]
    TooManyCandidates { count: usize, cap: usize },

    #[error("growth slope a1 + a3*z = {0} is too close to zero to invert")]
    SingularSlope(f64),

    #[error("no fitted effect for period starting {0}")]
    UnknownPeriod(i32),

    #[error("specialization row has no activities")]
    AllZeroRow,

    #[error("{stage}: {source}")]
    Stage {
        stage: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn category(&self) -> ErrorCategory {
        match self {
            Error::Config(_) | Error::UnknownLocation(_) => ErrorCategory::Config,
            Error::Stage { source, .. } => source.category(),
            _ => ErrorCategory::Data,
        }
    }

    /// Wraps an error with the pipeline stage that produced it.
    pub fn in_stage(self, stage: &str) -> Error {
        Error::Stage {
            stage: stage.to_string(),
            source: Box::new(self),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Error {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

/// Extension adding stage context to any fallible pipeline step.
pub trait StageExt<T> {
    fn stage(self, stage: &str) -> Result<T>;
}

impl<T> StageExt<T> for Result<T> {
    fn stage(self, stage: &str) -> Result<T> {
        self.map_err(|e| e.in_stage(stage))
    }
}
