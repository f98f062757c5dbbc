use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("argument {x} outside the principal-branch domain [-1/e, 0]")]
    LambertDomain { x: f64 },

    #[error("integration failed at tau = {tau}: component {component} = {value:e} (step size too large?)")]
    IntegrationFailure {
        tau: f64,
        component: &'static str,
        value: f64,
    },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("intervention infeasible: {0}")]
    Infeasible(String),

    #[error("trajectory not settled: terminal I = {terminal_i:e} is above the QSS threshold {threshold:e}")]
    InsufficientHorizon { terminal_i: f64, threshold: f64 },

    #[error("degenerate epidemic: {0}")]
    DegenerateEpidemic(String),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    /// Name of the library module the failure originates from.
    pub fn module(&self) -> &'static str {
        match self {
            Error::InvalidState(_) | Error::InvalidParameter { .. } => "model",
            Error::IntegrationFailure { .. } => "integrator",
            Error::LambertDomain { .. }
            | Error::InsufficientHorizon { .. }
            | Error::DegenerateEpidemic(_) => "analysis",
            Error::Precondition(_) | Error::Infeasible(_) => "single_interval",
        }
    }
}
