//! Simulation and diagnostics for the gradient flow of the mean-field equation
//! `−Δv + Q = ρ e^v / ∫e^v` on the flat square torus.
//!
//! Everything numerical is generic over [`Scalar`] (`f32` or `f64`); the aliases at the
//! bottom of this file fix the double-precision types used by the harness.

pub mod concentration;
pub mod error;
pub mod flow;
pub mod functionals;
pub mod grid;
pub mod krylov;
pub mod scalar;
pub mod stationary;

pub use concentration::{BubbleReport, ChenLiFit, ExtractConfig};
pub use error::{BlowUpCause, Error, Result};
pub use flow::{DiagnosticsRecord, FlowConfig, FlowState, RunOutcome, StepScheme};
pub use functionals::ProblemData;
pub use grid::{Field, Point, TorusGrid};
pub use scalar::Scalar;
pub use stationary::{Gauge, NewtonConfig, NewtonSolution};

pub type Grid64 = TorusGrid<f64>;
pub type Field64 = Field<f64>;
pub type Point64 = Point<f64>;
pub type Problem64 = ProblemData<f64>;

pub type Grid32 = TorusGrid<f32>;
pub type Field32 = Field<f32>;
pub type State64 = FlowState<f64>;
