use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::functionals::{exp_field, ProblemData};
use crate::grid::{Field, Point};
use crate::scalar::{lit, Scalar};

#[derive(Debug, Clone)]
pub struct ExtractConfig {
    /// A ball `B_R` is accepted once the annulus `B_{2R} \ B_R` carries less than this
    /// fraction of its mass.
    pub annulus_threshold: f64,
    /// Extraction stops when the unassigned mass fraction drops to this level.
    pub residual_threshold: f64,
    /// Largest admissible `R / |xᵢ − xⱼ|` over pairs of bubbles.
    pub separation_threshold: f64,
    /// Total mass a full `8π/ρ` quantum refers to (1 in the usual `∫e^v = 1` convention).
    pub normalization: f64,
}

impl Default for ExtractConfig {
    fn default() -> Self {
        Self {
            annulus_threshold: 0.02,
            residual_threshold: 0.05,
            separation_threshold: 0.2,
            normalization: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bubble {
    pub center: Point<f64>,
    /// Concentration scale `min(1/λ, R)` with `λ` read off the peak height.
    pub scale: f64,
    /// `R`; the bubble's mass is measured on `B_{2R}`.
    pub detection_radius: f64,
    /// `∫_{B_{2R}} e^v`.
    pub local_mass: f64,
    /// `ρ · local_mass / (8π · normalization)`.
    pub quantized_fraction: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BubbleReport {
    pub bubbles: Vec<Bubble>,
    /// Mass outside every `B_{2R}` over the total mass.
    pub residual_mass_fraction: f64,
    pub separation_ok: bool,
    /// `∫h²e^v`, when `h` was supplied.
    pub h_n_l2: Option<f64>,
    pub total_mass: f64,
    /// At least one bubble was found.
    pub concentrated: bool,
    /// The bubble count does not exceed `⌊ρ/8π⌋`.
    pub count_consistent: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnnulusMass {
    pub inner: f64,
    pub outer: f64,
    pub mass: f64,
}

fn masked_ball_mass<T: Scalar>(density: &Field<T>, center: Point<T>, radius: T) -> Result<f64> {
    Ok(density.ball_mass(center, radius)?.as_f64())
}

/// Greedy bubble extraction from the density `e^v`.
///
/// Starting at the heaviest remaining sample, the radius `R` doubles from two cells until
/// the annulus `B_{2R} \ B_R` is light; the bubble keeps the mass of `B_{2R}`, which is then
/// removed from the density. A peak whose ball never separates before `2R` exceeds `L/2`
/// ends the search. Extraction also stops once the leftover mass fraction falls to
/// `residual_threshold` or `⌊ρ/8π⌋ + 2` bubbles have been found.
pub fn extract_bubbles<T: Scalar>(
    v: &Field<T>,
    p: &ProblemData<T>,
    h: Option<&Field<T>>,
    cfg: &ExtractConfig,
) -> Result<BubbleReport> {
    if !(cfg.annulus_threshold > 0.0 && cfg.residual_threshold >= 0.0 && cfg.normalization > 0.0) {
        return Err(Error::Parameter("extraction thresholds must be positive".into()));
    }
    p.q().ensure_same_grid(v)?;
    let grid = v.grid().clone();
    let ev = exp_field(v)?;
    let total = ev.integrate().as_f64();
    let rho = p.rho().as_f64();
    let h_n_l2 = match h {
        Some(h) => Some(h.mul(h)?.inner(&ev)?.as_f64()),
        None => None,
    };
    let quantum_count = (rho / (8.0 * PI)).floor();
    let max_count = (quantum_count + 1.0).max(0.0) as usize;
    let half = grid.side_length().as_f64() * 0.5;
    let spacing = grid.spacing().as_f64();

    let mut density = ev.clone();
    let mut bubbles: Vec<Bubble> = Vec::new();
    while density.integrate().as_f64() / total > cfg.residual_threshold && bubbles.len() <= max_count {
        let peak = density.argmax();
        let center = grid.point_of(peak);
        let peak_density = density.values()[peak].as_f64();
        let mut radius = 2.0 * spacing;
        let detected = loop {
            if 2.0 * radius > half {
                break None;
            }
            let inner = masked_ball_mass(&density, center, lit(radius))?;
            let outer = masked_ball_mass(&density, center, lit(2.0 * radius))?;
            if outer - inner < cfg.annulus_threshold * inner {
                break Some((radius, outer));
            }
            radius *= 2.0;
        };
        let Some((radius, local_mass)) = detected else { break };
        let lambda = (rho.abs() * peak_density / (8.0 * cfg.normalization)).sqrt();
        let scale = if lambda > 0.0 { (1.0 / lambda).min(radius) } else { radius };
        bubbles.push(Bubble {
            center: Point {
                x: center.x.as_f64(),
                y: center.y.as_f64(),
            },
            scale,
            detection_radius: radius,
            local_mass,
            quantized_fraction: rho * local_mass / (8.0 * PI * cfg.normalization),
        });
        let cutoff = lit::<T>(2.0 * radius);
        let n = grid.n();
        let mut values = density.into_values();
        for (k, val) in values.iter_mut().enumerate() {
            if grid.sample_distance(center, k / n, k % n) <= cutoff {
                *val = T::zero();
            }
        }
        density = Field::new(grid.clone(), values)?;
    }

    let residual_mass_fraction = (density.integrate().as_f64() / total).clamp(0.0, 1.0);
    let mut separation_ok = true;
    for (i, a) in bubbles.iter().enumerate() {
        for b in &bubbles[i + 1..] {
            let d = grid
                .periodic_distance(grid.point(lit(a.center.x), lit(a.center.y)), grid.point(lit(b.center.x), lit(b.center.y)))
                .as_f64();
            if a.detection_radius.max(b.detection_radius) >= cfg.separation_threshold * d {
                separation_ok = false;
            }
        }
    }
    Ok(BubbleReport {
        concentrated: !bubbles.is_empty(),
        count_consistent: bubbles.len() as f64 <= quantum_count.max(0.0),
        bubbles,
        residual_mass_fraction,
        separation_ok,
        h_n_l2,
        total_mass: total,
    })
}

/// Masses of `e^v` on the dyadic annuli `B_{2^{j+1} r₀} \ B_{2^j r₀}` around `center`, for
/// every annulus that fits inside `B_{r₁}`.
pub fn annulus_profile<T: Scalar>(v: &Field<T>, center: Point<T>, r0: T, r1: T) -> Result<Vec<AnnulusMass>> {
    let half = v.grid().side_length() * lit(0.5);
    if !(r0 > T::zero() && r0 < r1 && r1 <= half) {
        return Err(Error::Parameter(format!("need 0 < r0 < r1 <= L/2, got r0 = {r0}, r1 = {r1}")));
    }
    let ev = exp_field(v)?;
    let mut out = Vec::new();
    let mut inner = r0;
    let mut inner_mass = ev.ball_mass(center, inner)?;
    while inner * lit(2.0) <= r1 {
        let outer = inner * lit(2.0);
        let outer_mass = ev.ball_mass(center, outer)?;
        out.push(AnnulusMass {
            inner: inner.as_f64(),
            outer: outer.as_f64(),
            mass: (outer_mass - inner_mass).as_f64(),
        });
        inner = outer;
        inner_mass = outer_mass;
    }
    Ok(out)
}
