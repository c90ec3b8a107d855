use thiserror::Error;

/// Errors produced by the deconvolution library.
#[derive(Debug, Error)]
pub enum DeconvError {
    #[error("requested frequency {requested} exceeds the aliasing limit n = {limit}")]
    FrequencyOverflow { requested: usize, limit: usize },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("distortion is not invertible: |Psi({k})| = {magnitude:e} below threshold")]
    NonInvertibleDistortion { k: i64, magnitude: f64 },

    #[error("numerical integration failed: {0}")]
    IntegrationFailure(String),

    #[error("Hermitian symmetry violated: imaginary residue {residue:e} at x = {x}")]
    SymmetryViolation { x: f64, residue: f64 },

    #[error("degenerate distribution: {0}")]
    DegenerateDistribution(String),

    #[error("invalid kernel: {0}")]
    InvalidKernel(String),

    #[error("domain error: {0}")]
    Domain(String),
}

pub type Result<T> = std::result::Result<T, DeconvError>;
