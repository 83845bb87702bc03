use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Errors raised by the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),

    #[error("missing required column `{0}`")]
    MissingColumn(String),

    #[error("line {line}: non-numeric value `{value}` in column `{column}`")]
    NonNumeric { line: u64, column: String, value: String },

    #[error("line {line}: timestamp {t} does not increase")]
    NonIncreasing { line: u64, t: f64 },

    #[error("non-uniform spacing: interval {index} is {found} s, expected {expected} s")]
    NonUniformSpacing { index: usize, found: f64, expected: f64 },

    #[error("need at least {needed} samples, found {found}")]
    TooFewSamples { needed: usize, found: usize },

    #[error("MISC value {value} at t={t} is outside [0, 10]")]
    MiscOutOfRange { t: f64, value: f64 },

    #[error("MISC value {value} at t={t} is not an integer")]
    MiscNonInteger { t: f64, value: f64 },

    #[error("invalid value: {0}")]
    Invalid(String),

    #[error("non-finite state at t={time} s (state index {index})")]
    NonFinite { time: f64, index: usize },

    #[error("time {t} s lies outside the simulated span [{start}, {end}]")]
    OutOfSpan { t: f64, start: f64, end: f64 },

    #[error("unsolvable motion profile: {0}")]
    UnsolvableProfile(String),

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("zero variance in series")]
    ZeroVariance,

    #[error("no symptoms: all observed MISC values are zero, participant excluded")]
    NoSymptoms,

    #[error("no optimizer start converged ({starts} starts)")]
    NoConvergence { starts: usize },

    #[error("internal error: {0}")]
    Internal(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
