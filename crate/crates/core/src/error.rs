use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the forecasting toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed CSV in {path}: {message}")]
    Csv { path: PathBuf, message: String },
    #[error("header is missing required column `{0}`")]
    MissingColumn(String),
    #[error("unknown variable `{0}` (not in the variable catalog)")]
    UnknownVariable(String),
    #[error("duplicate observation for company `{company}` at month {month}")]
    DuplicateObservation { company: String, month: i64 },
    #[error("no valid rows: {0}")]
    NoValidRows(String),
    #[error("no alignable (t-1, t) rows for the requested features")]
    NoAlignableRows,
    #[error("feature column `{0}` has zero variance")]
    ConstantColumn(String),
    #[error("split leaves the training set empty ({n} rows, test fraction {fraction})")]
    EmptyTrain { n: usize, fraction: f64 },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("empty input: {0}")]
    EmptyInput(String),
    #[error("covariance is rank deficient; offending columns {columns:?}")]
    RankDeficient { columns: Vec<usize> },
    #[error("design matrix is singular; collinear columns {columns:?}")]
    SingularDesign { columns: Vec<String> },
    #[error("stepwise elimination removed every variable")]
    EmptyModel,
    #[error("response has zero variance")]
    ConstantResponse,
    #[error("all residuals are zero")]
    ZeroResiduals,
    #[error("linear solve failed (lambda = {lambda:e})")]
    SolveFailed { lambda: f64 },
    #[error("MAPE undefined: every actual value is zero")]
    AllZeroActuals,
    #[error("duplicate model label `{0}`")]
    DuplicateLabel(String),
    #[error("serialization failed: {0}")]
    Serialize(#[from] serde_json::Error),
}

impl Error {
    /// True for failures of the numerical routines, as opposed to bad input data.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::RankDeficient { .. }
                | Error::SingularDesign { .. }
                | Error::EmptyModel
                | Error::ZeroResiduals
                | Error::SolveFailed { .. }
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
