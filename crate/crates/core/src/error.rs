use thiserror::Error;

/// Errors raised by the solvers and evaluators in this crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum MnmError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid MDP: {0}")]
    InvalidMdp(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("policy evaluation did not converge after {iterations} iterations (residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("linear system is numerically singular")]
    SingularSystem,

    #[error("trajectory enumeration exceeded the cap of {cap} retained trajectories")]
    EnumerationExplosion { cap: usize },

    #[error("augmented reward is infinite at (s={state}, a={action}, s'={next}); enable classifier smoothing")]
    InfiniteReward {
        state: usize,
        action: usize,
        next: usize,
    },

    #[error("solver diverged at iteration {iteration}: {reason}")]
    Divergence { iteration: usize, reason: String },
}

pub type Result<T> = std::result::Result<T, MnmError>;
