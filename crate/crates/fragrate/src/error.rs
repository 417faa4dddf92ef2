use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-finite value at index {index}: {context}")]
    NonFinite { index: usize, context: String },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("integrability violation: ∫ e^(πs·ρ⁻¹(z)) (ρ⁻¹)'(z) dP(z) diverges ({0})")]
    IntegrabilityViolation(String),

    #[error("hypothesis failure: |symbol| = {min:.3e} at ξ = {xi:.6} (threshold {threshold:.1e})")]
    HypothesisFailure { xi: f64, min: f64, threshold: f64 },

    #[error("kernel is purely atomic; pointwise density undefined, use the convolution operator")]
    AtomicKernel,

    #[error("wrong filter kind: expected {expected}, got {got}")]
    WrongFilter { expected: String, got: String },

    #[error("side condition violated: {0}")]
    SideCondition(String),

    #[error("CFL violation: dt·max(g/Δx) = {rate:.4} > 1, need at least {suggested_steps} steps")]
    CflViolation { rate: f64, suggested_steps: usize },

    #[error("config error in `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn config(field: &str, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.to_string(),
            message: message.into(),
        }
    }
}
