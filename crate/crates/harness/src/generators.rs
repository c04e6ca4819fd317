//! Background data `Q`, initial fields and synthetic bubble configurations.

use std::f64::consts::PI;
use std::sync::Arc;

use meanflow_core::concentration::chen_li_field;
use meanflow_core::functionals::{change_of_variables, energy_j};
use meanflow_core::{Field64, Grid64, Point64, Problem64};
use rand::Rng;
use thiserror::Error;

use crate::config::{ExperimentConfig, FSpec, InitSpec, QSpec};
use crate::rng::{stream, Stream};

/// The problem on the configured grid, plus `log f` when the background comes from a weight.
pub struct Setup {
    pub grid: Arc<Grid64>,
    pub problem: Problem64,
    pub log_f: Option<Field64>,
}

pub fn build_problem(cfg: &ExperimentConfig) -> anyhow::Result<Setup> {
    let grid = Grid64::new(cfg.grid_n, cfg.side_length)?;
    let rho = cfg.rho;
    let wave = 2.0 * PI / cfg.side_length;
    let setup = match &cfg.q_spec {
        QSpec::Constant => Setup {
            problem: Problem64::constant(&grid, rho)?,
            grid,
            log_f: None,
        },
        QSpec::CosinePerturbed { amplitude, mode } => {
            let k = wave * *mode as f64;
            let q = Field64::from_fn(&grid, |x, _| rho / grid.area() + amplitude * (k * x).cos())?;
            Setup {
                problem: Problem64::new(rho, q, None)?,
                grid,
                log_f: None,
            }
        }
        QSpec::FromF {
            f_spec: FSpec::ExpCosine { amplitude, mode },
        } => {
            let k = wave * *mode as f64;
            let log_f = Field64::from_fn(&grid, |x, _| amplitude * (k * x).cos())?;
            let f = log_f.map(f64::exp)?;
            let weighted = Problem64::new(rho, Field64::constant(&grid, rho / grid.area())?, Some(f))?;
            let (_, q) = change_of_variables(&weighted, &Field64::zeros(&grid))?;
            Setup {
                problem: Problem64::new(rho, q, weighted.f_weight().cloned())?,
                grid,
                log_f: Some(log_f),
            }
        }
    };
    Ok(setup)
}

/// Random real trigonometric polynomial with modes `|k₁|, |k₂| ≤ k_max` (zero mean) whose
/// coefficients are uniform in `[−amplitude, amplitude]`.
pub fn random_bandlimited(grid: &Arc<Grid64>, k_max: u32, amplitude: f64, rng: &mut impl Rng) -> anyhow::Result<Field64> {
    let k_max = k_max as i64;
    anyhow::ensure!(k_max < grid.n() as i64 / 2, "k_max must stay below the Nyquist index");
    let mut modes = Vec::new();
    for k1 in -k_max..=k_max {
        for k2 in 0..=k_max {
            if k2 == 0 && k1 <= 0 {
                continue;
            }
            let a = rng.random_range(-1.0..=1.0) * amplitude;
            let b = rng.random_range(-1.0..=1.0) * amplitude;
            modes.push((k1 as f64, k2 as f64, a, b));
        }
    }
    let wave = 2.0 * PI / grid.side_length();
    Ok(Field64::from_fn(grid, |x, y| {
        modes
            .iter()
            .map(|&(k1, k2, a, b)| {
                let phase = wave * (k1 * x + k2 * y);
                a * phase.cos() + b * phase.sin()
            })
            .sum()
    })?)
}

/// Default bubble center: the middle of the torus, shifted a quarter cell off the grid.
pub fn default_bubble_center(grid: &Grid64) -> Point64 {
    let c = grid.side_length() / 2.0 + grid.spacing() / 4.0;
    grid.point(c, c)
}

/// `2 log(2λ/(1 + λ²d²)) + log(2/ρ)` with `d` the periodic distance to `center`.
pub fn make_bubble_data(p: &Problem64, lambda: f64, center: Point64) -> anyhow::Result<Field64> {
    anyhow::ensure!(lambda >= 1.0, "bubble lambda must be at least 1, got {lambda}");
    anyhow::ensure!(p.rho() > 0.0, "the Chen-Li profile needs rho > 0");
    Ok(chen_li_field(p.grid(), lambda, center, p.rho())?)
}

#[derive(Debug, Clone)]
pub struct Calibration {
    pub v: Field64,
    pub lambda: f64,
    pub energy: f64,
    /// Every `(λ, J)` probed.
    pub trace: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, Error)]
#[error("no bubble with lambda <= 65536 reaches J <= {target} (best J = {best})")]
pub struct UnreachableTarget {
    pub target: f64,
    pub best: f64,
    pub trace: Vec<(f64, f64)>,
}

/// Doubles `λ` from `lambda_start` until the bubble data has `J_ρ ≤ target`.
pub fn calibrate_negative_energy(
    p: &Problem64,
    target: f64,
    center: Point64,
    lambda_start: f64,
) -> anyhow::Result<Result<Calibration, UnreachableTarget>> {
    let mut lambda = lambda_start;
    let mut trace = Vec::new();
    while lambda <= 65536.0 {
        let v = make_bubble_data(p, lambda, center)?;
        let energy = energy_j(p, &v)?;
        trace.push((lambda, energy));
        if energy <= target {
            return Ok(Ok(Calibration {
                v,
                lambda,
                energy,
                trace,
            }));
        }
        lambda *= 2.0;
    }
    let best = trace.iter().map(|t| t.1).fold(f64::INFINITY, f64::min);
    Ok(Err(UnreachableTarget { target, best, trace }))
}

/// Initial field in the flow variable `v`, together with the calibration when one ran.
pub fn initial_field(cfg: &ExperimentConfig, setup: &Setup) -> anyhow::Result<(Field64, Option<Calibration>)> {
    let grid = &setup.grid;
    let (u0, calibration) = match &cfg.init_spec {
        InitSpec::Zero => (Field64::zeros(grid), None),
        InitSpec::RandomBandlimited { k_max, amplitude, seed } => {
            let mut rng = stream(seed.unwrap_or(cfg.seed), Stream::InitialData);
            (random_bandlimited(grid, *k_max, *amplitude, &mut rng)?, None)
        }
        InitSpec::Bubble {
            lambda,
            center,
            target_energy,
        } => {
            let center = center.map_or_else(|| default_bubble_center(grid), |c| grid.point(c[0], c[1]));
            match target_energy {
                None => (make_bubble_data(&setup.problem, *lambda, center)?, None),
                Some(target) => {
                    let cal = calibrate_negative_energy(&setup.problem, *target, center, *lambda)??;
                    (cal.v.clone(), Some(cal))
                }
            }
        }
    };
    let v0 = match &setup.log_f {
        Some(log_f) => u0.add(log_f)?,
        None => u0,
    };
    Ok((v0, calibration))
}

/// `log(Σᵢ e^{v̂ᵢ} + floor)`, the floor carrying `floor_fraction` of the total mass.
pub fn synthetic_bubbles(
    p: &Problem64,
    centers: &[Point64],
    lambda: f64,
    floor_fraction: f64,
) -> anyhow::Result<Field64> {
    anyhow::ensure!((0.0..1.0).contains(&floor_fraction), "floor_fraction must lie in [0, 1)");
    let grid = p.grid();
    let mut density = Field64::zeros(grid);
    for &c in centers {
        density = density.add(&make_bubble_data(p, lambda, c)?.map(f64::exp)?)?;
    }
    let bubble_mass = density.integrate();
    let floor = if floor_fraction > 0.0 {
        floor_fraction / (1.0 - floor_fraction) * bubble_mass / grid.area()
    } else {
        0.0
    };
    anyhow::ensure!(bubble_mass > 0.0 || floor > 0.0, "synthetic field needs at least one bubble or a floor");
    Ok(density.shift(floor)?.map(f64::ln)?)
}

/// `count` centers spread along the diagonal, each a quarter cell off the grid.
pub fn diagonal_centers(grid: &Grid64, count: usize) -> Vec<Point64> {
    let l = grid.side_length();
    let off = grid.spacing() / 4.0;
    (0..count)
        .map(|i| {
            let s = l * (i as f64 + 0.5) / count as f64 + off;
            grid.point(s, s)
        })
        .collect()
}
