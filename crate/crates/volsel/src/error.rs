use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("grid invariant violated: {0}")]
    InvalidGrid(String),
    #[error("invalid parameter box: {0}")]
    InvalidBox(String),
    #[error("invalid specification: {0}")]
    InvalidSpec(String),
    #[error("nesting check failed: {0}")]
    Nesting(String),
    #[error("covariance not positive definite at step {step} (theta = {theta:?})")]
    NotPositiveDefinite { step: usize, theta: Vec<f64> },
    #[error("invalid tuning parameter: {0}")]
    InvalidLambda(String),
    #[error("optimization failed: {0}")]
    Optimize(String),
    #[error("criterion/fit mismatch: {0}")]
    CriterionMismatch(String),
    #[error("no candidates")]
    NoCandidates,
    #[error("non-finite state reached at step {0}")]
    NonFiniteState(usize),
    #[error("quadrature failed: {0}")]
    Quadrature(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}
