use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("grid mismatch: {left} vs {right}")]
    GridMismatch { left: String, right: String },

    #[error("field has {got} values but the grid has {expected} nodes")]
    LengthMismatch { expected: usize, got: usize },

    #[error("invalid rate value {value} at node {node}")]
    InvalidRate { node: usize, value: f64 },

    #[error("invalid filter: {0}")]
    InvalidFilter(String),

    #[error("Cholesky factorization failed for l = {l}, m = {m} (jitter escalated to {jitter:e})")]
    Factorization { l: f64, m: usize, jitter: f64 },

    #[error("grid has {nodes} nodes; dense GP covariance is capped at {cap}")]
    GridTooLarge { nodes: usize, cap: usize },

    #[error("latent state inconsistent with model: {0}")]
    InconsistentState(String),

    #[error("filter index {index} out of range for {filters} filters")]
    IndexOutOfRange { index: usize, filters: usize },

    #[error("negative value {value} where a non-negative one is required ({context})")]
    NegativeValue { value: f64, context: &'static str },

    #[error("no posterior samples")]
    EmptySamples,

    #[error("need at least 3 rows with positive values, have {usable} ({excluded} zero rows excluded)")]
    InsufficientRows { usable: usize, excluded: usize },

    #[error("ledger is missing constant `{0}`")]
    MissingConstant(&'static str),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("non-finite log-likelihood at initialization: {0}")]
    NonFiniteInitialization(String),
}
