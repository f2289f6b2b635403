//! Error types shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("operator is not Hermitian (max |A - A\u{2020}| = {0:.3e})")]
    NotHermitian(f64),

    #[error("operator is not unitary (max |A\u{2020}A - I| = {0:.3e})")]
    NotUnitary(f64),

    #[error("operator is not positive semidefinite (min eigenvalue {0:.3e})")]
    NotPsd(f64),

    #[error("Fock truncation too small: {0}")]
    TruncationTooSmall(String),

    #[error("invalid density matrix: {0}")]
    InvalidState(String),

    #[error("unstable potential: 1 + 4D/\u{03bd} = {0:.3e} is not positive")]
    UnstablePotential(f64),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("eigensolver did not converge after {0} sweeps")]
    EigNoConvergence(usize),

    #[error("integration aborted at t = {t:.6e}: {reason}")]
    IntegrationFailure { t: f64, reason: String },

    #[error("integration step is unstable: dt * spectral span = {0:.3} > 2.78")]
    UnstableStep(f64),

    #[error("unknown preset `{0}`")]
    UnknownPreset(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
