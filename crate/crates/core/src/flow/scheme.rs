use crate::error::{Error, Result};
use crate::functionals::{energy_j, exp_field, ProblemData};
use crate::grid::Field;
use crate::krylov::conjugate_gradient;
use crate::scalar::{lit, Scalar};

use super::monitors::rhs;
use super::{FlowConfig, FlowState, StepScheme};

const GROWTH: f64 = 1.2;
const CLEAN_STEPS_BEFORE_GROWTH: usize = 20;

enum Attempt<T: Scalar> {
    Accepted(Field<T>),
    /// Update left the admissible set (non-positive `1 + δ`, non-finite values).
    Inadmissible,
    SolverFailed { iterations: usize, residual: f64 },
}

/// Linearly implicit step with the diffusion coefficient `e^{−v}` frozen.
///
/// Solves `(e^v − dt Δ) δ = dt (Δv − Q + ρ e^v / ∫e^v)` by preconditioned CG and sets
/// `v⁺ = v + ln(1 + δ)`, so that `∫e^{v⁺} = ∫e^v (1 + δ)` equals `∫e^v` up to the
/// solver residual.
fn linearly_implicit<T: Scalar>(p: &ProblemData<T>, v: &Field<T>, dt: T, cfg: &FlowConfig) -> Result<Attempt<T>> {
    let grid = v.grid();
    let ev = exp_field(v)?;
    let w = ev.values();
    let vol = ev.integrate();
    let lap = v.laplacian();
    let rho = p.rho();
    let b: Vec<T> = (0..w.len())
        .map(|k| dt * (lap.values()[k] - p.q().values()[k] + rho * w[k] / vol))
        .collect();

    // Additive preconditioner: Jacobi for the mass term plus the exact inverse of the
    // constant-coefficient operator built on min(e^v), which covers the diffusive part.
    let n = grid.n();
    let mean_k_sq = {
        let mut s = T::zero();
        for p_ in 0..n {
            for q_ in 0..n {
                s = s + grid.k_sq(p_, q_);
            }
        }
        s / lit((n * n) as f64)
    };
    let w_min = w.iter().copied().fold(T::infinity(), T::min);
    let jacobi: Vec<T> = w.iter().map(|&wk| T::one() / (wk + dt * mean_k_sq)).collect();
    let apply = |x: &[T]| {
        let lx = grid.laplacian_raw(x);
        (0..x.len()).map(|k| w[k] * x[k] - dt * lx[k]).collect::<Vec<T>>()
    };
    let precondition = |r: &[T]| {
        let s = grid.solve_shifted_laplacian(r, w_min, dt);
        (0..r.len()).map(|k| jacobi[k] * r[k] + s[k]).collect::<Vec<T>>()
    };
    let out = conjugate_gradient(
        apply,
        precondition,
        &b,
        lit(cfg.imex_tolerance),
        cfg.max_inner_iterations,
    );
    if !out.converged {
        return Ok(Attempt::SolverFailed {
            iterations: out.iterations,
            residual: out.relative_residual.as_f64(),
        });
    }
    let mut next = Vec::with_capacity(w.len());
    for (k, &d) in out.solution.iter().enumerate() {
        if !(d > -T::one()) {
            return Ok(Attempt::Inadmissible);
        }
        let val = v.values()[k] + d.ln_1p();
        if !val.is_finite() {
            return Ok(Attempt::Inadmissible);
        }
        next.push(val);
    }
    Ok(Attempt::Accepted(Field::new(grid.clone(), next)?))
}

fn axpy<T: Scalar>(v: &Field<T>, s: T, k: &Field<T>) -> Result<Field<T>> {
    v.zip_map(k, |a, b| a + s * b)
}

fn rk4<T: Scalar>(p: &ProblemData<T>, v: &Field<T>, dt: T) -> Result<Attempt<T>> {
    let half = dt * lit(0.5);
    let stage = |x: Result<Field<T>>| -> Result<Option<Field<T>>> {
        match x {
            Ok(f) => Ok(Some(f)),
            Err(Error::NonFinite { .. }) => Ok(None),
            Err(e) => Err(e),
        }
    };
    let Some(k1) = stage(rhs(p, v))? else { return Ok(Attempt::Inadmissible) };
    let Some(v2) = stage(axpy(v, half, &k1))? else { return Ok(Attempt::Inadmissible) };
    let Some(k2) = stage(rhs(p, &v2))? else { return Ok(Attempt::Inadmissible) };
    let Some(v3) = stage(axpy(v, half, &k2))? else { return Ok(Attempt::Inadmissible) };
    let Some(k3) = stage(rhs(p, &v3))? else { return Ok(Attempt::Inadmissible) };
    let Some(v4) = stage(axpy(v, dt, &k3))? else { return Ok(Attempt::Inadmissible) };
    let Some(k4) = stage(rhs(p, &v4))? else { return Ok(Attempt::Inadmissible) };
    let sixth = dt / lit(6.0);
    let two = lit::<T>(2.0);
    let values = (0..k1.values().len())
        .map(|i| {
            v.values()[i]
                + sixth * (k1.values()[i] + two * k2.values()[i] + two * k3.values()[i] + k4.values()[i])
        })
        .collect();
    match Field::new(v.grid().clone(), values) {
        Ok(f) => Ok(Attempt::Accepted(f)),
        Err(Error::NonFinite { .. }) => Ok(Attempt::Inadmissible),
        Err(e) => Err(e),
    }
}

/// Largest explicit step: `1 / (max e^{−v} ((πn/L)² + |ρ|/a))`.
pub(crate) fn rk4_stability_cap<T: Scalar>(p: &ProblemData<T>, s: &FlowState<T>) -> f64 {
    let g = s.v.grid();
    let kmax = std::f64::consts::PI * g.n() as f64 / g.side_length().as_f64();
    let d_max = (-s.v.min().as_f64()).exp();
    1.0 / (d_max * (kmax * kmax + p.rho().as_f64().abs() / s.a.as_f64()))
}

/// Advances the flow by one accepted step.
///
/// A trial step is rejected, and retried with half the step, when the energy rises by
/// more than `10 dt² (1 + |J|)`, when the update is inadmissible, or when the inner solver
/// does not converge. After 20 consecutive clean steps the step grows by 20% up to
/// `dt_max`. The final step is shortened to land on `t_end`.
pub fn step<T: Scalar>(p: &ProblemData<T>, s: &FlowState<T>, cfg: &FlowConfig) -> Result<FlowState<T>> {
    let mut dt = s.next_dt.clamp(cfg.dt_min, cfg.dt_max);
    if cfg.step_scheme == StepScheme::ExplicitRk4 {
        dt = dt.min(rk4_stability_cap(p, s));
    }
    let controller_dt = dt;
    let remaining = cfg.t_end - s.t;
    let truncated = remaining > 0.0 && dt > remaining;
    if truncated {
        dt = remaining;
    }
    let floor = cfg.dt_min.min(dt);
    let j_old = s.energy.as_f64();
    let mut rejections = 0usize;
    let mut last_failure: Option<Error>;
    loop {
        let attempt = match cfg.step_scheme {
            StepScheme::LinearlyImplicit => linearly_implicit(p, &s.v, lit(dt), cfg)?,
            StepScheme::ExplicitRk4 => rk4(p, &s.v, lit(dt))?,
        };
        match attempt {
            Attempt::Accepted(v_new) => {
                let j_new = energy_j(p, &v_new)?;
                let allowed = 10.0 * dt * dt * (1.0 + j_old.abs());
                if j_new.as_f64() <= j_old + allowed {
                    let mut next = FlowState {
                        t: s.t + dt,
                        v: v_new,
                        a: s.a,
                        energy: j_new,
                        steps_taken: s.steps_taken + 1,
                        rejected_steps: s.rejected_steps + rejections,
                        last_dt: dt,
                        next_dt: s.next_dt,
                        clean_steps: s.clean_steps,
                    };
                    if rejections > 0 {
                        next.next_dt = dt;
                        next.clean_steps = 0;
                    } else if !truncated {
                        next.next_dt = controller_dt;
                        next.clean_steps += 1;
                        if next.clean_steps >= CLEAN_STEPS_BEFORE_GROWTH {
                            next.next_dt = (controller_dt * GROWTH).min(cfg.dt_max);
                            next.clean_steps = 0;
                        }
                    }
                    return Ok(next);
                }
                last_failure = None;
            }
            Attempt::Inadmissible => last_failure = None,
            Attempt::SolverFailed { iterations, residual } => {
                last_failure = Some(Error::SolverFailure { iterations, residual });
            }
        }
        rejections += 1;
        dt *= 0.5;
        if dt < floor {
            return Err(last_failure.unwrap_or(Error::StiffnessFailure { t: s.t, dt }));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::TorusGrid;
    use std::f64::consts::PI;

    fn constant_problem(n: usize, rho: f64) -> ProblemData<f64> {
        ProblemData::constant(&TorusGrid::standard(n).unwrap(), rho).unwrap()
    }

    #[test]
    fn fixed_point_is_preserved_by_both_schemes() {
        let p = constant_problem(16, 4.0 * PI);
        for scheme in [StepScheme::LinearlyImplicit, StepScheme::ExplicitRk4] {
            for dt in [1e-3, 0.1, 1.0] {
                let cfg = FlowConfig::fixed_step(dt, 10.0, scheme);
                let s0 = FlowState::initial(&p, Field::zeros(p.grid()), &cfg).unwrap();
                let s1 = step(&p, &s0, &cfg).unwrap();
                assert!(s1.v.sup_norm() < 1e-12, "{scheme:?} dt={dt}");
            }
        }
    }

    #[test]
    fn explicit_step_is_taylor_consistent() {
        let p = constant_problem(16, 4.0 * PI);
        let v0 = Field::from_fn(p.grid(), |x, _| 0.01 * x.cos()).unwrap();
        let f0 = rhs(&p, &v0).unwrap();
        let mut errs = Vec::new();
        for dt in [1e-3, 5e-4, 2.5e-4] {
            let cfg = FlowConfig::fixed_step(dt, 10.0, StepScheme::ExplicitRk4);
            let s0 = FlowState::initial(&p, v0.clone(), &cfg).unwrap();
            let s1 = step(&p, &s0, &cfg).unwrap();
            let euler = axpy(&v0, dt, &f0).unwrap();
            errs.push(s1.v.distance_sup(&euler).unwrap());
        }
        // Difference from forward Euler is O(dt²).
        assert!((errs[0] / errs[1] - 4.0).abs() < 0.2, "{errs:?}");
        assert!((errs[1] / errs[2] - 4.0).abs() < 0.2, "{errs:?}");
    }

    #[test]
    fn implicit_step_conserves_volume() {
        let g = TorusGrid::<f64>::standard(32).unwrap();
        let q = Field::from_fn(&g, |x, _| 1.0 + 0.5 * x.cos()).unwrap();
        let p = ProblemData::new(4.0 * PI, q, None).unwrap();
        let v0 = Field::from_fn(&g, |x, y| 0.8 * (x + 2.0 * y).sin()).unwrap();
        let cfg = FlowConfig::fixed_step(0.05, 10.0, StepScheme::LinearlyImplicit);
        let s0 = FlowState::initial(&p, v0, &cfg).unwrap();
        let s1 = step(&p, &s0, &cfg).unwrap();
        assert!(s1.volume_drift().unwrap().abs() < 1e-12);
        assert!(s1.energy < s0.energy);
    }

    #[test]
    fn step_lands_on_t_end() {
        let p = constant_problem(16, 1.0);
        let cfg = FlowConfig {
            t_end: 0.0025,
            ..FlowConfig::default()
        };
        let v0 = Field::from_fn(p.grid(), |x, _| 0.1 * x.sin()).unwrap();
        let s = FlowState::initial(&p, v0, &cfg).unwrap();
        let s = step(&p, &s, &cfg).unwrap();
        let s = step(&p, &s, &cfg).unwrap();
        let s = step(&p, &s, &cfg).unwrap();
        assert!((s.t - 0.0025).abs() < 1e-15);
        assert_eq!(s.next_dt, 1e-3);
    }

    #[test]
    fn rk4_respects_stability_cap() {
        let p = constant_problem(32, 4.0 * PI);
        let v0 = Field::from_fn(p.grid(), |x, _| 0.3 * x.cos()).unwrap();
        let cfg = FlowConfig::fixed_step(0.5, 10.0, StepScheme::ExplicitRk4);
        let s0 = FlowState::initial(&p, v0, &cfg).unwrap();
        let cap = rk4_stability_cap(&p, &s0);
        let s1 = step(&p, &s0, &cfg).unwrap();
        assert!(s1.last_dt <= cap && cap < 0.5);
    }
}
