use crate::error::{Error, Result};
use crate::functionals::{exp_field, ProblemData};
use crate::grid::{Field, Point};
use crate::scalar::{lit, Scalar};

/// A concentration point found by [`concentration_scan`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanHit<T: Scalar> {
    /// Peak of `|F|` inside the firing ball.
    pub center: Point<T>,
    /// `∫|F|` over the firing ball, at least `4π`.
    pub mass: T,
}

/// Locates balls of radius `r` carrying `∫|F| ≥ 4π`, with `F = ρe^v/∫e^v + h e^v − Q`
/// (that is `F = −Δv` when `h = −∂t v`).
///
/// Balls are centered at the local maxima of the ball-mass map under non-maximum
/// suppression at radius `r`. The maximum of that map can sit off the concentration point
/// (where `ρe^v/∫e^v` crosses `Q`, `|F|` dips on a ring), so each hit reports the peak of
/// `|F|` inside its ball, and hits sharing a peak are merged. Heaviest first.
pub fn concentration_scan<T: Scalar>(
    v: &Field<T>,
    h: Option<&Field<T>>,
    p: &ProblemData<T>,
    r: T,
) -> Result<Vec<ScanHit<T>>> {
    let grid = v.grid();
    if !(r > T::zero() && r <= grid.side_length() * lit(0.25)) {
        return Err(Error::Parameter(format!("scan radius {r} outside (0, L/4]")));
    }
    p.q().ensure_same_grid(v)?;
    if let Some(h) = h {
        h.ensure_same_grid(v)?;
    }
    let ev = exp_field(v)?;
    let vol = ev.integrate();
    let rho = p.rho();
    let f: Vec<T> = (0..ev.values().len())
        .map(|k| {
            let e = ev.values()[k];
            let hk = h.map_or(T::zero(), |h| h.values()[k]);
            (rho * e / vol + hk * e - p.q().values()[k]).abs()
        })
        .collect();
    let map = grid.ball_mass_map_raw(&f, r);
    let threshold = lit::<T>(4.0) * T::PI();
    let n = grid.n();
    let reach = (r / grid.spacing()).floor().to_usize().unwrap_or(0).min(n / 2);
    let mut hits = Vec::new();
    for (k, &m) in map.iter().enumerate() {
        if m < threshold {
            continue;
        }
        let (i, j) = (k / n, k % n);
        let mut is_max = true;
        'search: for di in 0..=2 * reach {
            for dj in 0..=2 * reach {
                let ii = (i + n + di - reach) % n;
                let jj = (j + n + dj - reach) % n;
                let other = ii * n + jj;
                if other == k || grid.sample_distance(grid.point_of(k), ii, jj) > r {
                    continue;
                }
                if map[other] > m || (map[other] == m && other < k) {
                    is_max = false;
                    break 'search;
                }
            }
        }
        if is_max {
            hits.push((k, m));
        }
    }
    hits.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap_or(std::cmp::Ordering::Equal));
    let mut out: Vec<ScanHit<T>> = Vec::new();
    for (k, m) in hits {
        let ball_center = grid.point_of(k);
        let mut peak = k;
        for (idx, &fk) in f.iter().enumerate() {
            if fk > f[peak] && grid.sample_distance(ball_center, idx / n, idx % n) <= r {
                peak = idx;
            }
        }
        let center = grid.point_of(peak);
        if out.iter().all(|h| grid.periodic_distance(h.center, center) > r) {
            out.push(ScanHit { center, mass: m });
        }
    }
    Ok(out)
}

/// Smallest radius `r*` at which some ball holds the fraction `β` of `∫e^v`, together with
/// the center of the heaviest such ball. The radius is resolved to half a grid cell.
pub fn select_core<T: Scalar>(v: &Field<T>, beta: T) -> Result<(Point<T>, T)> {
    if !(beta > T::zero() && beta < T::one()) {
        return Err(Error::Parameter(format!("beta must lie in (0, 1), got {beta}")));
    }
    let grid = v.grid();
    let ev = exp_field(v)?;
    let vol = ev.integrate();
    let best = |radius: T| {
        let map = grid.ball_mass_map_raw(ev.values(), radius);
        let (k, m) = map
            .iter()
            .copied()
            .enumerate()
            .fold((0, T::neg_infinity()), |acc, (k, m)| if m > acc.1 { (k, m) } else { acc });
        (k, m / vol)
    };
    let mut hi = grid.side_length() * lit(0.5);
    if best(hi).1 < beta {
        return Err(Error::NotConcentrated { beta: beta.as_f64() });
    }
    let mut lo = T::zero();
    let tol = grid.spacing() * lit(0.5);
    while hi - lo > tol {
        let mid = (lo + hi) * lit(0.5);
        if best(mid).1 >= beta {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let (k, _) = best(hi);
    Ok((grid.point_of(k), hi))
}
