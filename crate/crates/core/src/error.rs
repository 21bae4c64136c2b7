use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Error, Debug, Clone, PartialEq)]
pub enum Error {
    #[error("invalid value for `{field}`: {reason}")]
    InvalidSpec { field: String, reason: String },
    #[error("unsupported jump law: {0}")]
    UnsupportedJumpLaw(String),
    #[error("order mismatch: {required} power-jump orders required but only {available} simulated")]
    OrderMismatch { required: usize, available: usize },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("contraction condition violated: sup_t ∫(L_z² + L_u²) ds = {supremum:.6} (must be < 1)")]
    ContractionRejected { supremum: f64 },
    #[error("coefficients too large for the global Picard scheme: sup_t ∫(L_y² + L_η² + L_ζ²) ds = {supremum:.6} (must be < 1)")]
    CoefficientsTooLarge { supremum: f64 },
    #[error("Picard iteration did not converge after {iterations} iterations (last relative change {last:.3e})")]
    NonConvergence {
        iterations: usize,
        last: f64,
        history: Vec<f64>,
    },
    #[error("jump factor {factor} <= 0 on path {path}, step {step}")]
    JumpConditionBreach { path: usize, step: usize, factor: f64 },
    #[error("generator `{generator}` failed the `{flag}` audit")]
    FlagAuditFailed { generator: String, flag: String },
    #[error("free term `{0}` is not adapted")]
    NotAdapted(String),
}

impl Error {
    pub(crate) fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidSpec {
            field: field.into(),
            reason: reason.into(),
        }
    }
}
