use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("schema error: missing required column '{0}'")]
    Schema(String),

    #[error("format error at line {line}: {msg}")]
    Format { line: usize, msg: String },

    #[error("empty sample: {0}")]
    EmptySample(String),

    #[error("empty strategy matrix for {0}: no institution passes the activity filter")]
    EmptyMatrix(String),

    #[error("degenerate correlation: {usable} row(s) with positive variance, need at least 2")]
    DegenerateCorrelation { usable: usize },

    #[error("insufficient sample length {n}: need at least {min}")]
    InsufficientSample { n: usize, min: usize },

    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),

    #[error("eigenvalue iteration did not converge")]
    NoConvergence,

    #[error("ratio Q = {0} is below 1, outside the regime of the null density")]
    OutOfRegime(f64),

    #[error("dendrogram needs at least 2 leaves, got {0}")]
    TrivialDendrogram(usize),

    #[error("regressor has zero variance")]
    DegenerateRegressor,

    #[error("regression needs at least 3 pairs, got {0}")]
    TooFewPairs(usize),

    #[error("exact Poisson-binomial limited to {max} trials, got {k}; use Monte Carlo")]
    ExactTooLarge { k: usize, max: usize },

    #[error("invalid probability {0}: must lie in [0, 1]")]
    InvalidProbability(f64),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invariant violated: {0}")]
    Invariant(String),
}
