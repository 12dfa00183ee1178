use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("missing column `{0}` in header")]
    MissingField(String),

    #[error("timestamps not strictly increasing at row {row}")]
    NonIncreasingTimestamp { row: usize },

    #[error("non-positive price {value} at row {row}")]
    NonPositivePrice { row: usize, value: f64 },

    #[error("no grid point satisfies the minimum visit count {min_visits}")]
    NoReliablePoints { min_visits: usize },

    #[error("duplicate or non-ascending knot at index {0}")]
    BadKnots(usize),

    #[error("Gram matrix numerically singular (condition estimate {0:.3e})")]
    SingularGram(f64),

    #[error("interpolation residual {0:.3e} exceeds tolerance")]
    Residual(f64),

    #[error("curve not positive at x = {x}: value {value}")]
    NonPositive { x: f64, value: f64 },

    #[error("x = {x} outside curve domain [{lo}, {hi}]")]
    OutOfDomain { x: f64, lo: f64, hi: f64 },

    #[error("no positive power-law tail: sum of coefficients is {0}")]
    NoPositiveTail(f64),

    #[error("no feasible asymptotic weight in [{lo}, {hi}]")]
    NoFeasibleWeight { lo: f64, hi: f64 },

    #[error("quadrature did not converge: {0}")]
    Quadrature(String),

    #[error("schema mismatch in {file}: {msg}")]
    Schema { file: String, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}

/// An [`Error`] tagged with the pipeline stage that raised it.
#[derive(Debug, Error)]
#[error("[{stage}] {error}")]
pub struct StageError {
    pub stage: &'static str,
    pub error: Error,
}

pub(crate) trait StageExt<T> {
    fn stage(self, stage: &'static str) -> std::result::Result<T, StageError>;
}

impl<T, E: Into<Error>> StageExt<T> for std::result::Result<T, E> {
    fn stage(self, stage: &'static str) -> std::result::Result<T, StageError> {
        self.map_err(|e| StageError { stage, error: e.into() })
    }
}
