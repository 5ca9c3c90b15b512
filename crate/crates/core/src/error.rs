use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("singular moment matrix (smallest/largest eigenvalue = {ratio:e}, {n_points} points, basis size {basis_size})")]
    SingularMoments {
        ratio: f64,
        n_points: usize,
        basis_size: usize,
    },

    #[error("synthesis failed on a training list of {} points: {source}", train.len())]
    Synthesis {
        /// Dataset indices of the offending training list, in append order.
        train: Vec<usize>,
        #[source]
        source: Box<Error>,
    },

    #[error("bisection did not converge: residual {residual:e} after {iterations} iterations")]
    Convergence { residual: f64, iterations: usize },

    #[error("non-finite state at t = {t}: {state:?}")]
    NonFinite { t: f64, state: Vec<f64> },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
