use thiserror::Error;

/// Errors raised across the reconstruction toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("enumeration budget exceeded: {count} subsets requested, budget is {budget}")]
    BudgetExceeded { count: u128, budget: u128 },

    #[error("LP solver stopped at the iteration limit after {0} pivots")]
    IterationLimit(usize),

    #[error("LP reported infeasible (numerical breakdown)")]
    Infeasible,

    #[error("ill-conditioned system (condition estimate {0:.3e})")]
    IllConditioned(f64),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
