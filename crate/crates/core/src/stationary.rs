//! Direct solvers for the stationary equation `−Δv + Q = ρ e^v / ∫e^v`.

use thiserror::Error;

use crate::error::{Error, Result};
use crate::functionals::{energy_j, exp_field, first_variation, volume, ProblemData};
use crate::grid::Field;
use crate::krylov::gmres;
use crate::scalar::{lit, Scalar};

/// How the additive constant of a solution is fixed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Gauge {
    /// `∫v = 0`.
    ZeroMean,
    /// `∫e^v = a`.
    FixedVolume(f64),
}

#[derive(Debug, Clone)]
pub struct NewtonConfig {
    pub max_iters: usize,
    /// Threshold on the L² norm of the residual.
    pub tol: f64,
    /// First step length tried by the line search.
    pub damping: f64,
    /// Smallest step length before the line search gives up.
    pub min_damping: f64,
    pub gauge: Gauge,
    pub krylov_restart: usize,
    pub krylov_max_iters: usize,
}

impl Default for NewtonConfig {
    fn default() -> Self {
        Self {
            max_iters: 100,
            tol: 1e-11,
            damping: 1.0,
            min_damping: 2f64.powi(-20),
            gauge: Gauge::ZeroMean,
            krylov_restart: 60,
            krylov_max_iters: 600,
        }
    }
}

impl NewtonConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) || !(self.damping > 0.0 && self.damping <= 1.0) || !(self.min_damping > 0.0) {
            return Err(Error::Parameter("need tol > 0 and 0 < min_damping, 0 < damping <= 1".into()));
        }
        if let Gauge::FixedVolume(a) = self.gauge {
            if !(a > 0.0 && a.is_finite()) {
                return Err(Error::Parameter(format!("fixed volume must be positive, got {a}")));
            }
        }
        if self.max_iters == 0 || self.krylov_restart == 0 || self.krylov_max_iters == 0 {
            return Err(Error::Parameter("iteration limits must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct NewtonSolution<T: Scalar> {
    pub v: Field<T>,
    /// Newton updates applied.
    pub iterations: usize,
    pub residual: f64,
    /// Residual norm of every iterate, starting with the gauge-fixed initial guess.
    pub history: Vec<f64>,
}

#[derive(Debug, Error)]
pub enum NewtonFailureKind {
    #[error("no convergence within the iteration limit")]
    MaxIterations,
    #[error("line search could not reduce the residual")]
    LineSearch,
    /// The Krylov solve stagnated: the linearization is numerically singular, as expected
    /// near `ρ ∈ 8πℕ`.
    #[error("singular linearization (near-degenerate ρ = {rho})")]
    Degenerate { rho: f64 },
    #[error(transparent)]
    Numerical(#[from] Error),
}

#[derive(Debug, Error)]
#[error("Newton solve failed: {kind}; best residual {best_residual:e}")]
pub struct NewtonError<T: Scalar> {
    pub kind: NewtonFailureKind,
    pub best: Field<T>,
    pub best_residual: f64,
    pub history: Vec<f64>,
}

/// `−Δv + Q − ρ e^v / ∫e^v`.
pub fn residual<T: Scalar>(p: &ProblemData<T>, v: &Field<T>) -> Result<Field<T>> {
    first_variation(p, v)
}

fn apply_gauge<T: Scalar>(v: &Field<T>, gauge: Gauge) -> Result<Field<T>> {
    let centered = v.zero_mean();
    match gauge {
        Gauge::ZeroMean => Ok(centered),
        Gauge::FixedVolume(a) => {
            let shift = lit::<T>(a).ln() - volume(&centered)?.ln();
            centered.shift(shift)
        }
    }
}

fn project_zero_mean<T: Scalar>(x: &mut [T]) {
    let mean = x.iter().copied().fold(T::zero(), |s, v| s + v) / lit(x.len() as f64);
    x.iter_mut().for_each(|v| *v = *v - mean);
}

/// Damped Newton–Krylov solve of the stationary equation.
///
/// The Jacobian `φ ↦ −Δφ − (ρ/V)(e^v φ − e^v ∫e^v φ / V)` is applied matrix-free and
/// inverted on zero-mean functions by GMRES right-preconditioned with `(1 − Δ)^{-1}`. The
/// inner tolerance tracks the residual so the outer iteration converges quadratically.
pub fn newton_solve<T: Scalar>(
    p: &ProblemData<T>,
    v_init: &Field<T>,
    cfg: &NewtonConfig,
) -> std::result::Result<NewtonSolution<T>, NewtonError<T>> {
    let fail = |kind: NewtonFailureKind, best: Field<T>, history: Vec<f64>| {
        let best_residual = history.iter().copied().fold(f64::INFINITY, f64::min);
        NewtonError {
            kind,
            best,
            best_residual,
            history,
        }
    };
    if let Err(e) = cfg.validate().and_then(|_| p.q().ensure_same_grid(v_init)) {
        return Err(fail(e.into(), v_init.clone(), Vec::new()));
    }
    let grid = p.grid().clone();
    let cell = grid.cell_area();
    let rho = p.rho();
    let l2 = |r: &Field<T>| r.l2_norm().as_f64();

    let mut v = v_init.zero_mean();
    let mut r = match residual(p, &v) {
        Ok(r) => r,
        Err(e) => return Err(fail(e.into(), v, Vec::new())),
    };
    let mut r_norm = l2(&r);
    let mut history = vec![r_norm];
    let mut iterations = 0;
    while r_norm > cfg.tol {
        if iterations == cfg.max_iters {
            return Err(fail(NewtonFailureKind::MaxIterations, v, history));
        }
        let w = match exp_field(&v) {
            Ok(w) => w.into_values(),
            Err(e) => return Err(fail(e.into(), v, history)),
        };
        let vol = w.iter().copied().fold(T::zero(), |s, x| s + x) * cell;
        let coef = rho / vol;
        let apply = |phi: &[T]| {
            let lap = grid.laplacian_raw(phi);
            let w_phi = w.iter().zip(phi).fold(T::zero(), |s, (&a, &b)| s + a * b) * cell;
            (0..phi.len())
                .map(|k| -lap[k] - coef * (w[k] * phi[k] - w[k] * w_phi / vol))
                .collect::<Vec<T>>()
        };
        let precondition = |x: &[T]| {
            let mut y = grid.solve_shifted_laplacian(x, T::one(), T::one());
            project_zero_mean(&mut y);
            y
        };
        let mut rhs: Vec<T> = r.values().iter().map(|&x| -x).collect();
        project_zero_mean(&mut rhs);
        let forcing = r_norm.min(1e-2).max(1e-14);
        let (out, stagnated) = gmres(apply, precondition, &rhs, lit(forcing), cfg.krylov_restart, cfg.krylov_max_iters);
        if stagnated {
            return Err(fail(NewtonFailureKind::Degenerate { rho: rho.as_f64() }, v, history));
        }
        let mut direction = out.solution;
        project_zero_mean(&mut direction);

        let mut s = cfg.damping;
        let accepted = loop {
            let trial: Vec<T> = v.values().iter().zip(&direction).map(|(&a, &d)| a + lit::<T>(s) * d).collect();
            let candidate = Field::new(grid.clone(), trial)
                .and_then(|f| residual(p, &f).map(|res| (f, res)))
                .ok();
            if let Some((f, res)) = candidate {
                let n = l2(&res);
                if n < (1.0 - 1e-4 * s) * r_norm {
                    break Some((f, res, n));
                }
            }
            s *= 0.5;
            if s < cfg.min_damping {
                break None;
            }
        };
        match accepted {
            Some((f, res, n)) => {
                v = f.zero_mean();
                r = res;
                r_norm = n;
            }
            None => return Err(fail(NewtonFailureKind::LineSearch, v, history)),
        }
        iterations += 1;
        history.push(r_norm);
    }
    let v = match apply_gauge(&v, cfg.gauge) {
        Ok(v) => v,
        Err(e) => return Err(fail(e.into(), v, history)),
    };
    Ok(NewtonSolution {
        v,
        iterations,
        residual: r_norm,
        history,
    })
}

#[derive(Debug, Clone)]
pub struct DirectMinimum<T: Scalar> {
    pub v: Field<T>,
    /// `J_ρ` of every iterate, starting with the initial guess.
    pub energies: Vec<f64>,
    pub residual: f64,
}

/// Fixed-step H¹ gradient descent `v ← v − step (1 − Δ)^{-1} ∇J_ρ(v)` in the zero-mean
/// gauge. Intended for `ρ < 8π`, where `J_ρ` is coercive. An increase of `J_ρ` is reported
/// as [`Error::StepSize`].
pub fn minimize_direct<T: Scalar>(
    p: &ProblemData<T>,
    v_init: &Field<T>,
    step: f64,
    iters: usize,
) -> Result<DirectMinimum<T>> {
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::Parameter(format!("step must be positive, got {step}")));
    }
    p.q().ensure_same_grid(v_init)?;
    let grid = p.grid().clone();
    let mut v = v_init.zero_mean();
    let mut j = energy_j(p, &v)?;
    let mut energies = vec![j.as_f64()];
    for _ in 0..iters {
        let g = first_variation(p, &v)?;
        let mut h1 = grid.solve_shifted_laplacian(g.values(), T::one(), T::one());
        project_zero_mean(&mut h1);
        let next: Vec<T> = v.values().iter().zip(&h1).map(|(&a, &d)| a - lit::<T>(step) * d).collect();
        let next = match Field::new(grid.clone(), next) {
            Ok(f) => f,
            Err(Error::NonFinite { .. }) => {
                return Err(Error::StepSize {
                    before: j.as_f64(),
                    after: f64::INFINITY,
                })
            }
            Err(e) => return Err(e),
        };
        let j_next = match energy_j(p, &next) {
            Ok(j) => j,
            Err(Error::BlowUpOverflow { .. }) => T::infinity(),
            Err(e) => return Err(e),
        };
        let slack = 1e-13 * (1.0 + j.as_f64().abs());
        if !(j_next.as_f64() <= j.as_f64() + slack) {
            return Err(Error::StepSize {
                before: j.as_f64(),
                after: j_next.as_f64(),
            });
        }
        v = next;
        j = j_next;
        energies.push(j.as_f64());
    }
    let residual = first_variation(p, &v)?.l2_norm().as_f64();
    Ok(DirectMinimum { v, energies, residual })
}
