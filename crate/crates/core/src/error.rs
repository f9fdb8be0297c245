use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("matrix is not symmetric positive definite: {0}")]
    InvalidCovariance(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("ensemble needs at least {needed} particles, got {got}")]
    TooFewParticles { needed: usize, got: usize },

    #[error("regularization T = {t} must be below the smallest eigenvalue {lambda_min}")]
    RegularizationTooLarge { t: f64, lambda_min: f64 },

    #[error("matrices do not commute or are not diagonal: {0}")]
    NonCommuting(String),

    #[error("state left the analysis domain: {0}")]
    Domain(String),

    #[error("divergence at iteration {iteration}")]
    Diverged { iteration: usize },

    #[error("covariance lost positive definiteness at t = {time}")]
    SpdViolation { time: f64 },

    #[error("singular momentum map (1 + eta*G) at iteration {iteration}")]
    SingularMomentum { iteration: usize },

    #[error("incompatible grids: {0}")]
    IncompatibleGrid(String),
}

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}
