use thiserror::Error;

/// Errors raised by the solver and its front ends.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid potential: {0}")]
    InvalidPotential(String),

    #[error("{0}")]
    Range(String),

    #[error("self-check failed: {0}")]
    SelfCheck(String),

    #[error("eta is not monotone in energy: {0}")]
    NonMonotonic(String),

    #[error("tuning failed: {0}")]
    Tuning(String),

    #[error("t-matrix pole: {0}")]
    Pole(String),

    #[error("pole residue not resolved: {0}")]
    PoleResolution(String),

    #[error("oracle invalid: {0}")]
    OracleInvalid(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("diagnostic: {0}")]
    Diagnostic(String),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for errors caused by bad user input rather than the numerics.
    pub fn is_config(&self) -> bool {
        matches!(self, Error::Config(_) | Error::InvalidPotential(_) | Error::Json(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
