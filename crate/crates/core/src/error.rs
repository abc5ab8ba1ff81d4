//! Error type shared by every layer of the crate.

use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input range: lo ({lo}) must be strictly below hi ({hi})")]
    InvalidRange { lo: f64, hi: f64 },

    #[error("invalid spline order {q} for {h} membership functions (need 1 <= q <= h)")]
    InvalidOrder { h: usize, q: usize },

    #[error("invalid membership grid: {0}")]
    InvalidGrid(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("all rule activations underflowed to zero")]
    DegenerateActivation,

    #[error("regressor norm {norm_sq:e} is below the regularization threshold")]
    ZeroRegressor { norm_sq: f64 },

    #[error("adaptive gain {gain:e} is below the regularization threshold")]
    ZeroGain { gain: f64 },

    #[error("optimal-step denominator {denominator:e} is degenerate; step skipped")]
    DegenerateStep { denominator: f64 },

    #[error("error correlation matrix is singular even after ridge regularization")]
    SingularCorrelation,

    #[error("file not found: {}", .0.display())]
    FileNotFound(PathBuf),

    #[error("parse error{}: {message}", row.map(|r| format!(" at row {r}")).unwrap_or_default())]
    Parse { row: Option<u64>, message: String },

    #[error("series is empty or has fewer than two values")]
    EmptySeries,

    #[error("normalization range is degenerate (max == min over the fit range)")]
    DegenerateRange,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("snapshot version mismatch: file has v{found}, expected v{expected}")]
    VersionMismatch { found: u32, expected: u32 },

    #[error("corrupt snapshot: {0}")]
    CorruptSnapshot(String),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("at step {step}: {source}")]
    AtStep {
        step: usize,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn at_step(self, step: usize) -> Self {
        match self {
            e @ Error::AtStep { .. } => e,
            other => Error::AtStep {
                step,
                source: Box::new(other),
            },
        }
    }

    /// Process exit code for the CLI. Every variant maps to its own code; 2 is
    /// reserved for usage errors reported by the argument parser.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidRange { .. } => 10,
            Error::InvalidOrder { .. } => 11,
            Error::InvalidGrid(_) => 12,
            Error::DimensionMismatch { .. } => 13,
            Error::DegenerateActivation => 14,
            Error::ZeroRegressor { .. } => 15,
            Error::ZeroGain { .. } => 16,
            Error::DegenerateStep { .. } => 17,
            Error::SingularCorrelation => 18,
            Error::FileNotFound(_) => 20,
            Error::Parse { .. } => 21,
            Error::EmptySeries => 22,
            Error::DegenerateRange => 23,
            Error::InvalidConfig(_) => 24,
            Error::VersionMismatch { .. } => 25,
            Error::CorruptSnapshot(_) => 26,
            Error::Io(_) => 27,
            Error::AtStep { source, .. } => source.exit_code(),
        }
    }
}
