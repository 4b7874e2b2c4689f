use thiserror::Error;

/// Errors raised by the numerical routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("index {index} out of range [0, {max}]")]
    IndexOutOfRange { index: usize, max: usize },

    #[error("degree n = {n} outside the supported range |n| <= {max}")]
    DegreeOutOfRange { n: i32, max: i32 },

    #[error("degenerate metric for O({n}): Gram matrix not positive definite (condition estimate {condition:e})")]
    DegenerateMetric { n: i32, condition: f64 },

    #[error("divergent integral: {0}")]
    Divergence(String),

    #[error("quadrature did not converge: estimated error {estimate:e} above tolerance {tolerance:e}")]
    Quadrature { estimate: f64, tolerance: f64 },

    #[error("ODE integration failed to reach tolerance {requested:e} (achieved {achieved:e}): {reason}")]
    Accuracy { requested: f64, achieved: f64, reason: String },

    #[error("level {level} not crossed on the window [0, {window}]")]
    WindowTooSmall { level: f64, window: f64 },

    #[error("inconsistent input: {0}")]
    Inconsistent(String),

    #[error("eigensolver failure: {0}")]
    Eigen(String),

    #[error("unknown profile family `{0}`")]
    UnknownFamily(String),

    #[error("search failed at iteration {iteration}: {source}")]
    Search {
        iteration: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
