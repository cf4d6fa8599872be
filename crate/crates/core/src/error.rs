use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("contract violated: {0}")]
    Contract(String),

    #[error("pulse construction singular at |t| = {t}: alpha2 = {alpha2:e} with nonzero numerator")]
    ConstructionSingular { t: f64, alpha2: f64 },

    #[error("invalid seed pulse: {0}")]
    InvalidSeed(String),

    #[error("invalid pulse: {0}")]
    InvalidPulse(String),

    #[error("integration failed at t = {t}: {reason}")]
    IntegrationFailure { t: f64, reason: String },

    #[error("noise correction left the perturbative regime at t = {t}: |delta rho| = {norm:e}")]
    PerturbativeOverflow { t: f64, norm: f64 },

    #[error("not a transfer pulse: fidelity {fidelity} below gate {threshold}")]
    NotTransferPulse { fidelity: f64, threshold: f64 },

    #[error("integration window too short: {measure} for model {model} is {delta:e} at the end of the window")]
    WindowTooShort { model: String, measure: &'static str, delta: f64 },

    #[error("constraint infeasible: alpha1(T) has no sign change for g0 in [{lo}, {hi}]")]
    ConstraintInfeasible { lo: f64, hi: f64 },

    #[error("optimization failed: {0}")]
    OptimizationFailed(String),

    #[error("fit failed: {reason} (residual norm {residual:e})")]
    FitFailed { reason: String, residual: f64 },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Coarse classification used for process exit codes and error JSON.
    pub fn category(&self) -> ErrorCategory {
        match self {
            Error::Parse { .. } | Error::Contract(_) | Error::Domain(_) | Error::InvalidPulse(_) | Error::Io(_) => {
                ErrorCategory::Input
            }
            Error::ConstraintInfeasible { .. } => ErrorCategory::Infeasible,
            _ => ErrorCategory::Numeric,
        }
    }

    /// Short machine-readable tag.
    pub fn tag(&self) -> &'static str {
        match self {
            Error::Domain(_) => "domain",
            Error::Contract(_) => "contract",
            Error::ConstructionSingular { .. } => "construction_singular",
            Error::InvalidSeed(_) => "invalid_seed",
            Error::InvalidPulse(_) => "invalid_pulse",
            Error::IntegrationFailure { .. } => "integration_failure",
            Error::PerturbativeOverflow { .. } => "perturbative_overflow",
            Error::NotTransferPulse { .. } => "fidelity_gate",
            Error::WindowTooShort { .. } => "window_too_short",
            Error::ConstraintInfeasible { .. } => "constraint_infeasible",
            Error::OptimizationFailed(_) => "optimization_failed",
            Error::FitFailed { .. } => "fit_failed",
            Error::Parse { .. } => "parse",
            Error::Io(_) => "io",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    Input,
    Numeric,
    Infeasible,
}
