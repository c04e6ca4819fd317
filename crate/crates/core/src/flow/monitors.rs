use crate::error::Result;
use crate::functionals::{exp_field, ProblemData};
use crate::grid::Field;
use crate::scalar::Scalar;

use super::FlowState;

/// One row of the run's time series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiagnosticsRecord {
    pub t: f64,
    /// `J_ρ(v(t))`.
    pub j: f64,
    /// `∫e^v / a − 1`.
    pub volume_rel_drift: f64,
    /// `∫ v̇² e^v`.
    pub dissipation: f64,
    pub v_max: f64,
    pub v_min: f64,
    /// `‖−Δv + Q − ρ e^v/∫e^v‖₂`.
    pub residual: f64,
    /// `min R` with `R = e^{−v}(−Δv + Q)`.
    pub r_min: f64,
    /// Slack of the maximum-principle bound on `e^{v_max}` against the run's first record.
    pub maxbound_margin: f64,
    /// Step that produced this state (zero for the initial record).
    pub dt: f64,
}

/// Flow velocity `v̇ = e^{−v}(Δv − Q) + ρ / ∫e^v`.
pub fn rhs<T: Scalar>(p: &ProblemData<T>, v: &Field<T>) -> Result<Field<T>> {
    let ev = exp_field(v)?;
    let vol = ev.integrate();
    let lap = v.laplacian();
    let rho = p.rho();
    let values = lap
        .values()
        .iter()
        .zip(p.q().values())
        .zip(ev.values())
        .map(|((&l, &q), &e)| (l - q) / e + rho / vol)
        .collect();
    Field::new(v.grid().clone(), values)
}

/// `R = e^{−v}(−Δv + Q)`; constant (`= ρ/∫e^v`) exactly at stationary points.
pub fn curvature_field<T: Scalar>(p: &ProblemData<T>, v: &Field<T>) -> Result<Field<T>> {
    let lap = v.laplacian();
    let values = lap
        .values()
        .iter()
        .zip(p.q().values())
        .zip(v.values())
        .map(|((&l, &q), &vv)| (q - l) * (-vv).exp())
        .collect();
    Field::new(v.grid().clone(), values)
}

/// Evaluates every monitored quantity of `state`. `first` is the run's initial record, used
/// for the maximum-principle margin; pass `None` for the initial record itself.
pub fn diagnostics<T: Scalar>(
    p: &ProblemData<T>,
    state: &FlowState<T>,
    first: Option<&DiagnosticsRecord>,
) -> Result<DiagnosticsRecord> {
    let v = &state.v;
    let ev = exp_field(v)?;
    let vol = ev.integrate();
    let lap = v.laplacian();
    let rho = p.rho();
    let cell = v.grid().cell_area();
    let mut res_sq = T::zero();
    let mut diss = T::zero();
    let mut r_min = T::infinity();
    for k in 0..ev.values().len() {
        let e = ev.values()[k];
        let curv = p.q().values()[k] - lap.values()[k];
        let res = curv - rho * e / vol;
        res_sq = res_sq + res * res;
        // v̇ = −res / e^v, so v̇² e^v = res² / e^v
        diss = diss + res * res / e;
        r_min = r_min.min(curv / e);
    }
    let mut rec = DiagnosticsRecord {
        t: state.t,
        j: state.energy.as_f64(),
        volume_rel_drift: (vol / state.a - T::one()).as_f64(),
        dissipation: (diss * cell).as_f64(),
        v_max: v.max().as_f64(),
        v_min: v.min().as_f64(),
        residual: (res_sq * cell).sqrt().as_f64(),
        r_min: r_min.as_f64(),
        maxbound_margin: 0.0,
        dt: state.last_dt,
    };
    if let Some(first) = first {
        rec.maxbound_margin = max_principle_margin(p, state.a.as_f64(), first, &rec);
    }
    Ok(rec)
}

/// Right side minus left side of the maximum-principle bound on `e^{v_max(t)}`.
///
/// For `ρ > 0` with `k = ‖Q‖∞ a / ρ`:
/// `e^{v_max(t)} + k ≤ (e^{v_max(0)} + k) e^{ρ t / a}`.
/// For `ρ ≤ 0` the reaction term is nonpositive at the maximum, leaving
/// `e^{v_max(t)} ≤ e^{v_max(0)} + ‖Q‖∞ t`.
/// Nonnegative for every exact trajectory.
pub fn max_principle_margin<T: Scalar>(
    p: &ProblemData<T>,
    a: f64,
    rec_0: &DiagnosticsRecord,
    rec_t: &DiagnosticsRecord,
) -> f64 {
    let q_inf = p.q().sup_norm().as_f64();
    let rho = p.rho().as_f64();
    let t = rec_t.t - rec_0.t;
    let lhs_now = rec_t.v_max.exp();
    let start = rec_0.v_max.exp();
    if rho > 0.0 {
        let k = q_inf * a / rho;
        (start + k) * (rho * t / a).exp() - (lhs_now + k)
    } else {
        start + q_inf * t - lhs_now
    }
}
