use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },

    #[error("n < 4: need at least 4 observations, got {0}")]
    TooFewObservations(usize),

    #[error("duplicate variable name `{0}`")]
    DuplicateName(String),

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("rank-deficient design, offending columns {columns:?}")]
    RankDeficient { columns: Vec<usize> },

    #[error("coordinate descent did not converge after {iterations} sweeps (max change {max_change:e})")]
    NonConvergence { iterations: usize, max_change: f64 },

    #[error("zero signal: beta' Sigma beta must be positive")]
    ZeroSignal,

    #[error("standard method breaks down: full least squares needs p < n (n = {n}, p = {p})")]
    FullOlsInfeasible { n: usize, p: usize },

    #[error("unknown variable `{0}`")]
    UnknownVariable(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io { path: path.as_ref().display().to_string(), source }
    }

    /// Whether the failure comes from the numerics rather than from the input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::RankDeficient { .. }
                | Error::NonConvergence { .. }
                | Error::ZeroSignal
                | Error::FullOlsInfeasible { .. }
        )
    }
}
