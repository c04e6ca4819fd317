use std::fmt;
use std::sync::Arc;

use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::scalar::{lit, Scalar};

/// Uniform sampling of the flat square torus `[0, L)²` with `n` samples per axis.
///
/// Owns the FFT plans, so it is shared between fields through an [`Arc`].
#[derive(Clone)]
pub struct TorusGrid<T: Scalar> {
    n: usize,
    side_length: T,
    cell_area: T,
    wavenumbers: Vec<T>,
    pub(crate) forward: Arc<dyn Fft<T>>,
    pub(crate) inverse: Arc<dyn Fft<T>>,
}

impl<T: Scalar> fmt::Debug for TorusGrid<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TorusGrid")
            .field("n", &self.n)
            .field("side_length", &self.side_length)
            .finish()
    }
}

impl<T: Scalar> PartialEq for TorusGrid<T> {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n && self.side_length == other.side_length
    }
}

impl<T: Scalar> TorusGrid<T> {
    pub fn new(n: usize, side_length: T) -> Result<Arc<Self>> {
        if n < 8 || n % 2 != 0 {
            return Err(Error::InvalidGrid(format!("n must be even and >= 8, got {n}")));
        }
        if !(side_length.is_finite() && side_length > T::zero()) {
            return Err(Error::InvalidGrid(format!("side length must be positive, got {side_length}")));
        }
        let spacing = side_length / lit(n as f64);
        let scale = T::TAU() / side_length;
        let wavenumbers = (0..n)
            .map(|i| {
                let k = if i <= n / 2 { i as f64 } else { i as f64 - n as f64 };
                lit::<T>(k) * scale
            })
            .collect();
        let mut planner = FftPlanner::new();
        Ok(Arc::new(Self {
            n,
            side_length,
            cell_area: spacing * spacing,
            wavenumbers,
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
        }))
    }

    /// The default `2π`-periodic torus.
    pub fn standard(n: usize) -> Result<Arc<Self>> {
        Self::new(n, T::TAU())
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.n * self.n
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        false
    }

    #[inline]
    pub fn side_length(&self) -> T {
        self.side_length
    }

    #[inline]
    pub fn spacing(&self) -> T {
        self.side_length / lit(self.n as f64)
    }

    #[inline]
    pub fn cell_area(&self) -> T {
        self.cell_area
    }

    /// `|M| = L²`.
    #[inline]
    pub fn area(&self) -> T {
        self.side_length * self.side_length
    }

    /// Angular wavenumbers `2πk/L` in FFT order; index `n/2` is the Nyquist mode.
    #[inline]
    pub fn wavenumbers(&self) -> &[T] {
        &self.wavenumbers
    }

    /// Coordinates of sample `(i, j)`.
    #[inline]
    pub fn coord(&self, i: usize, j: usize) -> (T, T) {
        let h = self.spacing();
        (lit::<T>(i as f64) * h, lit::<T>(j as f64) * h)
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        i * self.n + j
    }

    /// Sample position of a flat index.
    #[inline]
    pub fn point_of(&self, index: usize) -> Point<T> {
        let (x, y) = self.coord(index / self.n, index % self.n);
        Point { x, y }
    }

    pub fn point(&self, x: T, y: T) -> Point<T> {
        Point {
            x: wrap(x, self.side_length),
            y: wrap(y, self.side_length),
        }
    }

    /// Minimum-image displacement `b - a` along one axis, in `[-L/2, L/2)`.
    #[inline]
    pub fn min_image(&self, d: T) -> T {
        let l = self.side_length;
        let half = l * lit(0.5);
        wrap(d + half, l) - half
    }

    /// Geodesic distance on the flat torus.
    pub fn periodic_distance(&self, a: Point<T>, b: Point<T>) -> T {
        let dx = self.min_image(b.x - a.x);
        let dy = self.min_image(b.y - a.y);
        dx.hypot(dy)
    }

    /// Distance from `center` to sample `(i, j)`.
    #[inline]
    pub(crate) fn sample_distance(&self, center: Point<T>, i: usize, j: usize) -> T {
        let (x, y) = self.coord(i, j);
        self.min_image(x - center.x).hypot(self.min_image(y - center.y))
    }

    pub fn same_as(&self, other: &Self) -> bool {
        self == other
    }
}

fn wrap<T: Scalar>(x: T, l: T) -> T {
    let r = x % l;
    let r = if r < T::zero() { r + l } else { r };
    // `-tiny % l + l` can round up to exactly `l`.
    if r >= l {
        T::zero()
    } else {
        r
    }
}

/// A point of the torus with coordinates reduced into `[0, L)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point<T> {
    pub x: T,
    pub y: T,
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn rejects_odd_or_small_grids() {
        assert!(TorusGrid::<f64>::standard(7).is_err());
        assert!(TorusGrid::<f64>::standard(6).is_err());
        assert!(TorusGrid::<f64>::standard(9).is_err());
        assert!(TorusGrid::<f64>::new(16, -1.0).is_err());
        assert!(TorusGrid::<f64>::standard(8).is_ok());
    }

    #[test]
    fn cell_area_tiles_the_torus() {
        let g = TorusGrid::<f64>::new(48, 3.7).unwrap();
        let total = g.cell_area() * (48 * 48) as f64;
        assert!((total - 3.7 * 3.7).abs() <= 4.0 * f64::EPSILON * total);
    }

    #[test]
    fn points_are_reduced() {
        let g = TorusGrid::<f64>::standard(16).unwrap();
        let p = g.point(-0.5, 2.0 * PI + 1.0);
        assert!((p.x - (2.0 * PI - 0.5)).abs() < 1e-12);
        assert!((p.y - 1.0).abs() < 1e-12);
        let q = g.point(-1e-300, 0.0);
        assert!(q.x >= 0.0 && q.x < 2.0 * PI);
    }

    #[test]
    fn distance_examples() {
        let g = TorusGrid::<f64>::standard(16).unwrap();
        let o = g.point(0.0, 0.0);
        assert_eq!(g.periodic_distance(o, o), 0.0);
        let b = g.point(2.0 * PI - 0.1, 0.0);
        assert!((g.periodic_distance(o, b) - 0.1).abs() < 1e-12);
        let far = g.point(PI, PI);
        assert!((g.periodic_distance(o, far) - PI * 2f64.sqrt()).abs() < 1e-12);
    }
}
