use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("row {row}: {message}")]
    Parse { row: usize, message: String },

    #[error("unrepairable gap between {before} and {after}")]
    UnrepairableGap { before: String, after: String },

    #[error("boundary gap at {at}")]
    BoundaryGap { at: String },

    #[error("degenerate series: median absolute deviation is zero")]
    DegenerateSeries,

    #[error("insufficient history: need {needed} hours, have {available}")]
    InsufficientHistory { needed: usize, available: usize },

    #[error("market misalignment: {0}")]
    MarketMisalignment(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("degenerate denominator: naive MAE is zero")]
    DegenerateDenominator,

    #[error("degenerate differential: loss differential has zero variance")]
    DegenerateDifferential,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("checkpoint error at `{path}`: {message}")]
    Checkpoint { path: String, message: String },

    #[error("report error: {0}")]
    Report(String),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Short machine-readable tag, used by the CLI error line.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Io { .. } => "io",
            Error::Parse { .. } => "parse",
            Error::UnrepairableGap { .. } => "unrepairable_gap",
            Error::BoundaryGap { .. } => "boundary_gap",
            Error::DegenerateSeries => "degenerate_series",
            Error::InsufficientHistory { .. } => "insufficient_history",
            Error::MarketMisalignment(_) => "market_misalignment",
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::Empty(_) => "empty",
            Error::DegenerateDenominator => "degenerate_denominator",
            Error::DegenerateDifferential => "degenerate_differential",
            Error::InvalidArgument(_) => "invalid_argument",
            Error::Config(_) => "config",
            Error::Checkpoint { .. } => "checkpoint",
            Error::Report(_) => "report",
            Error::Csv(_) => "csv",
            Error::Json(_) => "json",
        }
    }
}
