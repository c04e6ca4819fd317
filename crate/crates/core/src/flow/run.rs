use crate::error::{BlowUpCause, Error, Result};
use crate::functionals::ProblemData;
use crate::grid::Field;
use crate::scalar::Scalar;

use super::monitors::{diagnostics, DiagnosticsRecord};
use super::scheme::step;
use super::{FlowConfig, FlowState};

/// Receives the records emitted during a run together with the state they describe.
pub trait RunObserver<T: Scalar> {
    fn on_record(&mut self, record: &DiagnosticsRecord, state: &FlowState<T>) -> Result<()>;
}

impl<T: Scalar> RunObserver<T> for () {
    fn on_record(&mut self, _: &DiagnosticsRecord, _: &FlowState<T>) -> Result<()> {
        Ok(())
    }
}

impl<T: Scalar> RunObserver<T> for Vec<DiagnosticsRecord> {
    fn on_record(&mut self, record: &DiagnosticsRecord, _: &FlowState<T>) -> Result<()> {
        self.push(*record);
        Ok(())
    }
}

/// Adapts a closure into a [`RunObserver`].
pub struct ObserveWith<F>(pub F);

impl<T, F> RunObserver<T> for ObserveWith<F>
where
    T: Scalar,
    F: FnMut(&DiagnosticsRecord, &FlowState<T>) -> Result<()>,
{
    fn on_record(&mut self, record: &DiagnosticsRecord, state: &FlowState<T>) -> Result<()> {
        (self.0)(record, state)
    }
}

#[derive(Debug, Clone)]
pub enum RunOutcome<T: Scalar> {
    /// The residual fell below `stop_residual`.
    Converged { state: FlowState<T>, residual: f64 },
    /// The energy fell below `stop_energy`.
    Diverged { state: FlowState<T>, energy: f64 },
    /// The integration could not continue; `state` is the last accepted state.
    BlowUpSuspected {
        cause: BlowUpCause,
        state: FlowState<T>,
        detail: String,
    },
    TimeExhausted { state: FlowState<T> },
}

impl<T: Scalar> RunOutcome<T> {
    pub fn state(&self) -> &FlowState<T> {
        match self {
            Self::Converged { state, .. }
            | Self::Diverged { state, .. }
            | Self::BlowUpSuspected { state, .. }
            | Self::TimeExhausted { state } => state,
        }
    }

    pub fn into_state(self) -> FlowState<T> {
        match self {
            Self::Converged { state, .. }
            | Self::Diverged { state, .. }
            | Self::BlowUpSuspected { state, .. }
            | Self::TimeExhausted { state } => state,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Self::Converged { .. } => "converged",
            Self::Diverged { .. } => "diverged",
            Self::BlowUpSuspected { .. } => "blow_up_suspected",
            Self::TimeExhausted { .. } => "time_exhausted",
        }
    }
}

/// Share of `∫e^v` carried by the heaviest cell.
fn peak_cell_share<T: Scalar>(state: &FlowState<T>) -> f64 {
    let cell = state.v.grid().cell_area().as_f64();
    (state.v.max().as_f64()).exp() * cell / state.a.as_f64()
}

/// Integrates the flow from `v0` until one of the stopping rules fires.
///
/// Records go to `observer` at `t = 0`, whenever `record_interval` has elapsed, and for
/// the final state. A relative volume drift above `volume_drift_max` is an
/// [`Error::IntegratorAccuracy`]; breakdowns of the integrator are reported as
/// [`RunOutcome::BlowUpSuspected`].
pub fn run<T: Scalar>(
    p: &ProblemData<T>,
    v0: Field<T>,
    cfg: &FlowConfig,
    observer: &mut impl RunObserver<T>,
) -> Result<RunOutcome<T>> {
    cfg.validate()?;
    let mut state = FlowState::initial(p, v0, cfg)?;
    let first = diagnostics(p, &state, None)?;
    observer.on_record(&first, &state)?;
    if first.residual < cfg.stop_residual {
        return Ok(RunOutcome::Converged {
            residual: first.residual,
            state,
        });
    }
    if first.j <= cfg.stop_energy {
        return Ok(RunOutcome::Diverged { energy: first.j, state });
    }
    let mut next_record = cfg.record_interval;
    let t_tol = 1e-12 * cfg.t_end.max(1.0);
    loop {
        if state.t >= cfg.t_end - t_tol {
            return Ok(RunOutcome::TimeExhausted { state });
        }
        let next = match step(p, &state, cfg) {
            Ok(next) => next,
            Err(e) => match e.blow_up_cause() {
                Some(cause) => {
                    let rec = diagnostics(p, &state, Some(&first))?;
                    observer.on_record(&rec, &state)?;
                    return Ok(RunOutcome::BlowUpSuspected {
                        cause,
                        detail: e.to_string(),
                        state,
                    });
                }
                None => return Err(e),
            },
        };
        state = next;
        let rec = match diagnostics(p, &state, Some(&first)) {
            Ok(rec) => rec,
            Err(Error::BlowUpOverflow { v_max }) => {
                return Ok(RunOutcome::BlowUpSuspected {
                    cause: BlowUpCause::Overflow,
                    detail: format!("max v = {v_max}"),
                    state,
                })
            }
            Err(e) => return Err(e),
        };
        if rec.volume_rel_drift.abs() > cfg.volume_drift_max {
            observer.on_record(&rec, &state)?;
            return Err(Error::IntegratorAccuracy {
                t: state.t,
                drift: rec.volume_rel_drift,
                allowed: cfg.volume_drift_max,
            });
        }
        let share = peak_cell_share(&state);
        let outcome = if rec.residual < cfg.stop_residual {
            Some(RunOutcome::Converged {
                residual: rec.residual,
                state: state.clone(),
            })
        } else if rec.j <= cfg.stop_energy {
            Some(RunOutcome::Diverged {
                energy: rec.j,
                state: state.clone(),
            })
        } else if share > cfg.unresolved_fraction {
            Some(RunOutcome::BlowUpSuspected {
                cause: BlowUpCause::Unresolved,
                detail: format!("one cell holds {share:.3} of the volume at t = {}", state.t),
                state: state.clone(),
            })
        } else {
            None
        };
        let at_end = state.t >= cfg.t_end - t_tol;
        let due = cfg.record_interval == 0.0 || state.t >= next_record - t_tol;
        if outcome.is_some() || at_end || due {
            observer.on_record(&rec, &state)?;
            if due && cfg.record_interval > 0.0 {
                next_record = ((state.t + t_tol) / cfg.record_interval).floor() * cfg.record_interval
                    + cfg.record_interval;
            }
        }
        if let Some(outcome) = outcome {
            return Ok(outcome);
        }
    }
}
