//! Blow-up diagnostics: mass scans, bubble extraction with `8π/ρ` quantization, fits of
//! the Chen–Li profile and dyadic annulus audits.

mod bubbles;
mod fit;
mod scan;

pub use bubbles::{annulus_profile, extract_bubbles, AnnulusMass, Bubble, BubbleReport, ExtractConfig};
pub use fit::{chen_li_fit, ChenLiFit, FitFailure};
pub use scan::{concentration_scan, select_core, ScanHit};

use std::f64::consts::PI;
use std::sync::Arc;

use crate::error::Result;
use crate::grid::{Field, Point, TorusGrid};
use crate::scalar::{lit, Scalar};

/// `2 log(2λ / (1 + λ²|x − x₀|²)) + log(2/ρ)` at distance `d` from the center.
pub fn chen_li_value(lambda: f64, d: f64, rho: f64) -> f64 {
    2.0 * (2.0 * lambda / (1.0 + lambda * lambda * d * d)).ln() + (2.0 / rho).ln()
}

/// `ρ ∫_{B_R} e^{v̂}` for the Chen–Li profile: `8π λ²R² / (1 + λ²R²)`.
pub fn chen_li_mass(lambda: f64, radius: f64) -> f64 {
    let s = lambda * lambda * radius * radius;
    8.0 * PI * s / (1.0 + s)
}

/// The Chen–Li profile placed on the torus, using the periodic distance to `center`.
pub fn chen_li_field<T: Scalar>(grid: &Arc<TorusGrid<T>>, lambda: f64, center: Point<T>, rho: f64) -> Result<Field<T>> {
    Field::from_points(grid, |p| {
        let d = grid.periodic_distance(center, p).as_f64();
        lit(chen_li_value(lambda, d, rho))
    })
}
