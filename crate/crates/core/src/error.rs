use thiserror::Error;

/// Errors raised by the engine.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("timestamps must be strictly increasing (violation at index {index})")]
    NonMonotonicTimestamps { index: usize },

    #[error("non-finite value at index {index}")]
    NonFiniteValue { index: usize },

    #[error("regressor shape mismatch: {0}")]
    RegressorShapeMismatch(String),

    #[error("invalid seasonal period {0} (must be >= 1)")]
    InvalidPeriod(usize),

    #[error("non-positive value at index {index}; multiplicative mode requires y > 0")]
    NonPositiveValue { index: usize },

    #[error("series too short: need at least {needed} points, got {got}")]
    SeriesTooShort { needed: usize, got: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("value {0} is outside the distribution support")]
    OutOfSupport(f64),

    #[error("non-positive observation at index {index}; this model requires y > 0")]
    NonPositiveObservation { index: usize },

    #[error("level collapsed to a non-positive value at step {step}")]
    LevelCollapse { step: usize },

    #[error("forecast path {path} infeasible after {retries} retries")]
    PathInfeasible { path: usize, retries: usize },

    #[error("coefficient arity mismatch: expected {expected}, got {got}")]
    ArityMismatch { expected: usize, got: usize },

    #[error("regressors missing: {0}")]
    RegressorMissing(String),

    #[error("parameter {name} = {value} is out of bounds")]
    OutOfBounds { name: String, value: f64 },

    #[error("every MAP restart started from an infeasible point")]
    AllRestartsInfeasible,

    #[error("chain {chain} stuck: post-warmup acceptance rate {rate:.4}")]
    ChainStuck { chain: usize, rate: f64 },

    #[error("too few draws: need >= {min_chains} chains of >= {min_iters} iterations")]
    TooFewDraws { min_chains: usize, min_iters: usize },

    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),

    #[error("empty input")]
    EmptyInput,
}

pub type Result<T> = std::result::Result<T, Error>;
