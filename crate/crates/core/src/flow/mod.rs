//! Time integration of the gradient flow `∂t e^v = Δv − Q + ρ e^v / ∫e^v`.
//!
//! The flow conserves `∫e^v` and decreases `J_ρ`; [`run`] integrates it with an
//! energy-controlled step size and classifies how the trajectory ends.

mod monitors;
mod run;
mod scheme;

pub use monitors::{curvature_field, diagnostics, max_principle_margin, rhs, DiagnosticsRecord};
pub use run::{run, ObserveWith, RunObserver, RunOutcome};
pub use scheme::step;

use crate::error::{Error, Result};
use crate::functionals::{energy_j, volume, ProblemData};
use crate::grid::Field;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepScheme {
    /// Classical RK4 under the diffusive stability cap.
    ExplicitRk4,
    /// Frozen-coefficient linearly implicit Euler with a volume-conserving update.
    LinearlyImplicit,
}

#[derive(Debug, Clone)]
pub struct FlowConfig {
    pub dt_init: f64,
    pub dt_min: f64,
    pub dt_max: f64,
    pub step_scheme: StepScheme,
    /// Relative residual of the inner conjugate-gradient solve.
    pub imex_tolerance: f64,
    pub max_inner_iterations: usize,
    pub t_end: f64,
    /// Stationarity threshold on `‖−Δv + Q − ρe^v/∫e^v‖₂`.
    pub stop_residual: f64,
    /// The run is declared divergent once `J ≤ stop_energy`.
    pub stop_energy: f64,
    /// Largest tolerated `|∫e^v / a − 1|`.
    pub volume_drift_max: f64,
    /// Time between emitted records; zero records every accepted step.
    pub record_interval: f64,
    /// Share of the volume a single cell may hold before the run reports blow-up.
    pub unresolved_fraction: f64,
}

impl Default for FlowConfig {
    fn default() -> Self {
        Self {
            dt_init: 1e-3,
            dt_min: 1e-9,
            dt_max: 1e-2,
            step_scheme: StepScheme::LinearlyImplicit,
            imex_tolerance: 1e-10,
            max_inner_iterations: 500,
            t_end: 50.0,
            stop_residual: 1e-8,
            stop_energy: -1e4,
            volume_drift_max: 1e-7,
            record_interval: 0.0,
            unresolved_fraction: 0.5,
        }
    }
}

impl FlowConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("dt_init", self.dt_init),
            ("dt_min", self.dt_min),
            ("dt_max", self.dt_max),
            ("imex_tolerance", self.imex_tolerance),
            ("t_end", self.t_end),
            ("stop_residual", self.stop_residual),
            ("volume_drift_max", self.volume_drift_max),
            ("unresolved_fraction", self.unresolved_fraction),
        ];
        for (name, value) in positive {
            if !(value > 0.0 && value.is_finite()) {
                return Err(Error::Parameter(format!("{name} must be positive, got {value}")));
            }
        }
        if !(self.dt_min <= self.dt_init && self.dt_init <= self.dt_max) {
            return Err(Error::Parameter("need dt_min <= dt_init <= dt_max".into()));
        }
        if self.record_interval < 0.0 || self.max_inner_iterations == 0 {
            return Err(Error::Parameter("record_interval must be >= 0 and max_inner_iterations > 0".into()));
        }
        Ok(())
    }

    /// Constant step `dt` with no adaptation (still halved on energy violations).
    pub fn fixed_step(dt: f64, t_end: f64, scheme: StepScheme) -> Self {
        Self {
            dt_init: dt,
            dt_min: dt.min(1e-12),
            dt_max: dt,
            step_scheme: scheme,
            t_end,
            ..Self::default()
        }
    }
}

/// The evolving solution with the step-controller bookkeeping.
#[derive(Debug, Clone)]
pub struct FlowState<T: Scalar> {
    pub t: f64,
    pub v: Field<T>,
    /// `∫e^{v₀}`, conserved by the continuous flow.
    pub a: T,
    /// Cached `J_ρ(v)`.
    pub energy: T,
    pub steps_taken: usize,
    pub rejected_steps: usize,
    pub last_dt: f64,
    /// Step size the controller will try next.
    pub next_dt: f64,
    clean_steps: usize,
}

impl<T: Scalar> FlowState<T> {
    pub fn initial(p: &ProblemData<T>, v0: Field<T>, cfg: &FlowConfig) -> Result<Self> {
        p.q().ensure_same_grid(&v0)?;
        let a = volume(&v0)?;
        let energy = energy_j(p, &v0)?;
        Ok(Self {
            t: 0.0,
            v: v0,
            a,
            energy,
            steps_taken: 0,
            rejected_steps: 0,
            last_dt: 0.0,
            next_dt: cfg.dt_init,
            clean_steps: 0,
        })
    }

    /// `∫e^v / a − 1`.
    pub fn volume_drift(&self) -> Result<T> {
        Ok(volume(&self.v)? / self.a - T::one())
    }
}
