use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("invalid model order K = {0} (must be >= 1)")]
    InvalidOrder(usize),

    #[error("invalid filter length M = {0} (must be >= 1)")]
    InvalidLength(usize),

    #[error("index {index} out of range [0, {bound}) in {context}")]
    IndexOutOfRange {
        context: &'static str,
        index: usize,
        bound: usize,
    },

    #[error("dense object of {requested} entries exceeds the cap of {cap}")]
    SizeCap { requested: u128, cap: usize },

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("non-finite value: {0}")]
    NonFinite(&'static str),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("filter diverged at iteration {iteration}")]
    Divergence { iteration: u64 },

    #[error("realization {realization} diverged at iteration {iteration}")]
    RealizationDiverged { realization: usize, iteration: u64 },

    #[error("config error: {0}")]
    Config(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn mismatch(context: &'static str, expected: usize, actual: usize) -> Self {
        Error::DimensionMismatch {
            context,
            expected,
            actual,
        }
    }

    /// True for failures caused by a filter blowing up rather than bad input.
    pub fn is_divergence(&self) -> bool {
        matches!(
            self,
            Error::Divergence { .. } | Error::RealizationDiverged { .. }
        )
    }
}
