//! Error type shared by every solver stage.

use thiserror::Error;

/// Failures raised by the dispersion, field, inversion and solver layers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum WaveError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("root certification failed: additional sign change near zeta = {zeta:.6}")]
    CertificationFailed { zeta: f64 },

    #[error("degenerate inversion constant: {0}")]
    DegenerateConstant(String),

    #[error("grid tail {tail:.3e} exceeds tolerance {tol:.1e}")]
    TailTooLarge { tail: f64, tol: f64 },

    #[error("field has a non-decaying analytic part")]
    NonDecayingInput,

    #[error("mollification width must be positive, got {0}")]
    NonPositiveEpsilon(f64),

    #[error("kernel moment {moment:.3e} exceeds tolerance {tol:.1e}")]
    MomentViolated { moment: f64, tol: f64 },

    #[error("dispersion symbol {value:.3e} is near zero at mode {index}")]
    NearSingularMode { index: usize, value: f64 },

    #[error("sign condition failed: {0}")]
    SignConditionFailed(String),

    #[error("domain too small: {0}")]
    DomainTooSmall(String),

    #[error("inner iteration is not a contraction (ratio {ratio:.4})")]
    NonContraction { ratio: f64 },

    #[error("iteration cap {cap} exceeded")]
    IterationCapExceeded { cap: usize },

    #[error("corrector left the ball: norm {norm:.6} >= radius {rho:.6}")]
    BallEscaped { norm: f64, rho: f64 },

    #[error("chain blew up at t = {time:.4}")]
    BlowUp { time: f64 },

    #[error("saturation active at convergence (beta = {beta:.3e})")]
    ClampActive { beta: f64 },

    #[error("mollification half-window spans only {nodes:.2} grid nodes")]
    UnderResolved { nodes: f64 },
}

impl WaveError {
    /// Stable variant name, written into reports.
    pub fn name(&self) -> &'static str {
        match self {
            WaveError::InvalidParams(_) => "InvalidParams",
            WaveError::CertificationFailed { .. } => "CertificationFailed",
            WaveError::DegenerateConstant(_) => "DegenerateConstant",
            WaveError::TailTooLarge { .. } => "TailTooLarge",
            WaveError::NonDecayingInput => "NonDecayingInput",
            WaveError::NonPositiveEpsilon(_) => "NonPositiveEpsilon",
            WaveError::MomentViolated { .. } => "MomentViolated",
            WaveError::NearSingularMode { .. } => "NearSingularMode",
            WaveError::SignConditionFailed(_) => "SignConditionFailed",
            WaveError::DomainTooSmall(_) => "DomainTooSmall",
            WaveError::NonContraction { .. } => "NonContraction",
            WaveError::IterationCapExceeded { .. } => "IterationCapExceeded",
            WaveError::BallEscaped { .. } => "BallEscaped",
            WaveError::BlowUp { .. } => "BlowUp",
            WaveError::ClampActive { .. } => "ClampActive",
            WaveError::UnderResolved { .. } => "UnderResolved",
        }
    }

    /// True for errors caused by rejected configuration rather than solver behaviour.
    pub fn is_config_error(&self) -> bool {
        matches!(
            self,
            WaveError::InvalidParams(_) | WaveError::NonPositiveEpsilon(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, WaveError>;
