use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Why a flow run stopped short of a regular outcome.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlowUpCause {
    /// `v_max` exceeded the overflow exponent of the scalar type.
    Overflow,
    /// The step controller needed a step below `dt_min`.
    StiffnessFailure,
    /// A single grid cell holds more than the configured share of the volume.
    Unresolved,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite value at sample {index}")]
    NonFinite { index: usize },
    #[error("fields live on different grids")]
    GridMismatch,
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("exp(v) overflows: v_max = {v_max}")]
    BlowUpOverflow { v_max: f64 },
    #[error("step size fell below dt_min at t = {t} (dt = {dt})")]
    StiffnessFailure { t: f64, dt: f64 },
    #[error("inner linear solver did not converge in {iterations} iterations (relative residual {residual:e})")]
    SolverFailure { iterations: usize, residual: f64 },
    #[error("volume drift {drift:e} exceeds the allowed {allowed:e} at t = {t}")]
    IntegratorAccuracy { t: f64, drift: f64, allowed: f64 },
    #[error("energy increased from {before} to {after}: step size too large")]
    StepSize { before: f64, after: f64 },
    #[error("concentration below target: no radius reaches mass fraction {beta}")]
    NotConcentrated { beta: f64 },
    #[error("snapshot format: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Classifies errors that a flow run reports as suspected blow-up rather than a failure.
    pub fn blow_up_cause(&self) -> Option<BlowUpCause> {
        match self {
            Error::BlowUpOverflow { .. } => Some(BlowUpCause::Overflow),
            Error::StiffnessFailure { .. } | Error::SolverFailure { .. } => Some(BlowUpCause::StiffnessFailure),
            _ => None,
        }
    }
}
