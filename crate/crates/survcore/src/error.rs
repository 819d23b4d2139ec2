use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("schema error: {0}")]
    Schema(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("column {column:?}, row {row}: cannot parse {value:?} as a number")]
    BadCell {
        column: String,
        row: usize,
        value: String,
    },

    #[error("column {0:?} is entirely missing; mean is undefined")]
    AllMissing(String),

    #[error("Cox fit did not converge: {0}")]
    NoConvergence(String),

    #[error("monotone likelihood: |beta[{index}]| = {value:.2} exceeded the divergence guard")]
    MonotoneLikelihood { index: usize, value: f64 },

    #[error("information matrix is singular (column {0})")]
    SingularInformation(usize),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("row {0} is in-bag for every tree; no out-of-bag prediction exists")]
    NeverOob(usize),

    #[error("censoring calibration failed: {0}")]
    Calibration(String),

    #[error("{dropped} of {total} bootstrap replicates dropped ({reason}); configuration unstable")]
    TooManyDropped {
        dropped: usize,
        total: usize,
        reason: String,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}
