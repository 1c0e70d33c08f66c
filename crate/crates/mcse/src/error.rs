use thiserror::Error;

/// Errors surfaced by estimators, samplers, and the replication harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("empty trace")]
    EmptyTrace,

    #[error("insufficient draws for batching: n = {n} gives fewer than 2 batches")]
    InsufficientDraws { n: usize },

    #[error("invalid parameter {name} = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("need at least {need} chains, got {got}")]
    TooFewChains { need: usize, got: usize },

    #[error("chains must share one length; saw {first} and {other}")]
    UnequalChainLengths { first: usize, other: usize },

    #[error("per-chain length {len} too short: {reason}")]
    ChainTooShort { len: usize, reason: &'static str },

    #[error("degenerate within-chain variance (all chains constant)")]
    DegenerateWithinVariance,

    #[error("covariance not positive definite")]
    NotPositiveDefinite,

    #[error("non-finite value encountered in {context}")]
    NonFinite { context: &'static str },

    #[error("quantile inversion failed to bracket p = {p}")]
    QuantileBracket { p: f64 },

    #[error("replication {rep} exceeded the draw cap of {cap}")]
    CapExceeded { rep: usize, cap: u64 },

    #[error("{context}: expected {expected} functionals, got {got}")]
    FunctionalCountMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
