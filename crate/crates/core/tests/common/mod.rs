#![allow(dead_code)]

use std::f64::consts::PI;
use std::sync::Arc;

use meanflow_core::{Field64, Grid64, Problem64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random real trigonometric polynomial with modes `|k₁|, |k₂| ≤ kmax` and coefficients
/// in `[−amp, amp]`.
pub fn band_limited(grid: &Arc<Grid64>, seed: u64, kmax: i32, amp: f64) -> Field64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut modes = Vec::new();
    for k1 in -kmax..=kmax {
        for k2 in 0..=kmax {
            if k2 == 0 && k1 <= 0 {
                continue;
            }
            let a: f64 = rng.random_range(-amp..=amp);
            let b: f64 = rng.random_range(-amp..=amp);
            modes.push((k1 as f64, k2 as f64, a, b));
        }
    }
    let scale = 2.0 * PI / grid.side_length();
    Field64::from_fn(grid, |x, y| {
        modes
            .iter()
            .map(|&(k1, k2, a, b)| {
                let phase = scale * (k1 * x + k2 * y);
                a * phase.cos() + b * phase.sin()
            })
            .sum()
    })
    .unwrap()
}

/// `Q = ρ/|M| + amp cos x` on the standard torus.
pub fn cosine_problem(grid: &Arc<Grid64>, rho: f64, amp: f64) -> Problem64 {
    let q = Field64::from_fn(grid, |x, _| rho / grid.area() + amp * x.cos()).unwrap();
    Problem64::new(rho, q, None).unwrap()
}
