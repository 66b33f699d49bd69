use thiserror::Error;

/// Errors raised by the numerical routines and the experiment runner.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("kernel evaluation produced a non-finite value at grid node ({i}, {j})")]
    Evaluation { i: usize, j: usize },

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("kernel is not positive semidefinite: min eigenvalue {min_eigenvalue:e} vs max {max_eigenvalue:e}")]
    NonPsd { min_eigenvalue: f64, max_eigenvalue: f64 },

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("factor family is rank deficient: numerical rank {rank} of {requested}")]
    RankDeficient { rank: usize, requested: usize },

    #[error("max frequency {max_freq} aliases on a grid of {n_points} points")]
    Aliasing { max_freq: usize, n_points: usize },

    #[error("grid too coarse: {reason} (largest trustworthy value {max_trustworthy})")]
    Resolution { reason: String, max_trustworthy: f64 },

    #[error("at least {required} Monte Carlo samples are needed, got {got}")]
    InsufficientSamples { required: usize, got: usize },

    #[error("invalid decomposition: {0}")]
    InvalidDecomposition(String),

    #[error("range error: {0}")]
    Range(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn arg(msg: impl Into<String>) -> Self {
        Error::Argument(msg.into())
    }

    /// True for errors caused by user-supplied configuration rather than numerics.
    pub fn is_config(&self) -> bool {
        matches!(self, Error::Config(_) | Error::Argument(_) | Error::Domain(_) | Error::InsufficientSamples { .. })
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
