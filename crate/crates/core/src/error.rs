use std::path::PathBuf;

/// Errors produced anywhere in the crate.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid population: must be at least 1")]
    InvalidPopulation,

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("invalid time grid: {0}")]
    InvalidGrid(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("particle system failed; no path can be sampled")]
    NoPath,

    #[error("proposal covariance is not positive definite: {0}")]
    Tuning(String),

    #[error("pilot tuning failed after {adjustments} step-size adjustments (last acceptance {last_rate:.3})")]
    TuningFailed {
        adjustments: usize,
        last_rate: f64,
        trace: Vec<crate::inference::PilotBatch>,
    },

    #[error("particle filter failed at the initial parameter vector {0:?}; the chain cannot be anchored")]
    InitialLikelihoodFailed(Vec<f64>),

    #[error("ABC threshold too small: {accepted} accepted out of {attempts} attempts")]
    EpsilonTooSmall { accepted: usize, attempts: u64 },

    #[error("chain is empty after burn-in")]
    EmptyChain,

    #[error("R-hat undefined: zero within-chain variance")]
    UndefinedRhat,

    #[error("not enough samples: need at least {need}, got {got}")]
    TooFewSamples { need: usize, got: usize },

    #[error("config error at `{path}`: {msg}")]
    Config { path: String, msg: String },

    #[error("{file}: line {line}: {msg}")]
    Parse {
        file: PathBuf,
        line: usize,
        msg: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
