use thiserror::Error;

/// Errors surfaced by the projection, calibration and estimation layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("horizon mismatch: {left} vs {right}")]
    HorizonMismatch { left: usize, right: usize },

    #[error("model point {id}: no mortality rate for age {age} in year {year}")]
    MissingMortality { id: String, age: u32, year: usize },

    #[error("assumption coverage: {0}")]
    AssumptionCoverage(String),

    #[error("invalid assumption: {0}")]
    InvalidAssumption(String),

    #[error("invalid model point {id}: {reason}")]
    InvalidModelPoint { id: String, reason: String },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("calibration failed: {0}")]
    Calibration(String),

    #[error("collinear regressors: {columns:?}")]
    Collinearity { columns: Vec<String> },

    #[error("zero-variance regressor: {0}")]
    ZeroVariance(String),

    #[error("regressor layout mismatch: {0}")]
    LayoutMismatch(String),

    #[error("empty distribution")]
    EmptyDistribution,

    #[error("time budget exceeded after {completed} of {total} outer paths")]
    BudgetExceeded { completed: usize, total: usize },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error on {path}: {message}")]
    Csv { path: String, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;
