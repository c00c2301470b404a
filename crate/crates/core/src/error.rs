use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// No parameter value reproduces the requested anchor.
    #[error("unsolvable: {0}")]
    Unsolvable(String),

    /// The input leaves the result undetermined (zero reference, coincident seeds, ...).
    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("fit did not converge after {iterations} iterations (cost {cost:e})")]
    NonConvergence {
        iterations: usize,
        cost: f64,
        /// Best parameter vector reached before giving up.
        best: Vec<f64>,
    },

    #[error("found {found} peak candidates, {requested} requested")]
    InsufficientPeaks { found: usize, requested: usize },

    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("empty input: {0}")]
    Empty(String),

    #[error("unknown emitter `{0}`")]
    UnknownEmitter(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    /// True for errors caused by malformed or invalid input (as opposed to
    /// numerical failures such as non-convergence).
    pub fn is_input_error(&self) -> bool {
        !matches!(self, Error::NonConvergence { .. } | Error::Io(_))
    }
}
