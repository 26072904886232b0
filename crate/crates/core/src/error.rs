use thiserror::Error;

/// Errors raised by the toolkit. Every variant carries enough context to
/// name the violated condition in a report.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("divergent integral: {0}")]
    Divergent(String),

    #[error("duplicate lattice point {0:?}")]
    DuplicatePoint(Vec<i64>),

    #[error("solver did not converge after {iterations} iterations (last residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("solution collapsed to the zero vector (row sums near zero?)")]
    Collapse,

    #[error("algebra check failed: {0}")]
    Algebra(String),

    #[error("sign assertion failed: {name} = {value:e}")]
    Sign { name: &'static str, value: f64 },

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),
}

pub type Result<T> = std::result::Result<T, Error>;
