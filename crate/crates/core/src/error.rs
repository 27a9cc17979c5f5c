use thiserror::Error;

/// Errors raised by the simulator, the optimizers and the experiment harness.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum CacheError {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("cache capacity exceeded: {size} > {capacity}")]
    CapacityExceeded { size: usize, capacity: usize },

    #[error("{what} is not a sub-multiset of {of}")]
    NotSubMultiset {
        what: &'static str,
        of: &'static str,
    },

    #[error("distance {0} m outside the configured cell range")]
    DistanceOutOfRange(f64),

    #[error("impossible access state: elapsed {elapsed} >= max inter-access time {d_max}")]
    ImpossibleAccessState { elapsed: usize, d_max: usize },

    #[error("lifetime {lifetime} exceeds maximum lifetime {k_max}")]
    LifetimeOutOfRange { lifetime: usize, k_max: usize },

    #[error("singular regression matrix")]
    SingularRegression,

    #[error("no convergence after {0} iterations")]
    NoConvergence(usize),

    #[error("training diverged: {0}")]
    Diverged(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for CacheError {
    fn from(e: std::io::Error) -> Self {
        CacheError::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, CacheError>;
