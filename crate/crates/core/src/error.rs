use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("chain length L={0} outside supported range 2..=24 (dense matrices above L=24 exceed desk memory)")]
    LengthOutOfRange(usize),

    #[error("matrix is not Hermitian: max |H - H^dag| element = {max_dev:.3e} exceeds {tol:.1e}")]
    NotHermitian { max_dev: f64, tol: f64 },

    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("eigensolver failure: {0}")]
    Eigensolver(String),

    #[error("norm drift |<psi|psi> - 1| = {drift:.3e} at cycle {cycle} exceeds 1e-8; aborting run")]
    NormDrift { cycle: usize, drift: f64 },

    #[error("trajectory too short: need at least {needed} cycles, have {got}")]
    ShortTrajectory { needed: usize, got: usize },

    #[error("{0}")]
    Precondition(String),

    #[error("brute-force enumeration limited to N <= {limit}, got N = {got}")]
    EnumerationTooLarge { limit: usize, got: usize },
}

impl Error {
    pub fn precondition(msg: impl Into<String>) -> Self {
        Error::Precondition(msg.into())
    }
}
