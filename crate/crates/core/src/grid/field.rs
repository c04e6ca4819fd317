use std::sync::Arc;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

use super::torus::{Point, TorusGrid};

/// Finite real samples on a [`TorusGrid`], row-major: index `i * n + j` holds `f(i h, j h)`.
#[derive(Debug, Clone)]
pub struct Field<T: Scalar> {
    grid: Arc<TorusGrid<T>>,
    values: Vec<T>,
}

fn check_finite<T: Scalar>(values: &[T]) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(index) => Err(Error::NonFinite { index }),
        None => Ok(()),
    }
}

impl<T: Scalar> Field<T> {
    pub fn new(grid: Arc<TorusGrid<T>>, values: Vec<T>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Parameter(format!(
                "expected {} samples, got {}",
                grid.len(),
                values.len()
            )));
        }
        check_finite(&values)?;
        Ok(Self { grid, values })
    }

    pub fn constant(grid: &Arc<TorusGrid<T>>, c: T) -> Result<Self> {
        Self::new(grid.clone(), vec![c; grid.len()])
    }

    pub fn zeros(grid: &Arc<TorusGrid<T>>) -> Self {
        Self {
            grid: grid.clone(),
            values: vec![T::zero(); grid.len()],
        }
    }

    /// Samples `f(x, y)` at every grid point.
    pub fn from_fn(grid: &Arc<TorusGrid<T>>, mut f: impl FnMut(T, T) -> T) -> Result<Self> {
        let n = grid.n();
        let mut values = Vec::with_capacity(grid.len());
        for i in 0..n {
            for j in 0..n {
                let (x, y) = grid.coord(i, j);
                values.push(f(x, y));
            }
        }
        Self::new(grid.clone(), values)
    }

    /// Builds a field from a point function evaluated with the grid's geometry at hand.
    pub fn from_points(grid: &Arc<TorusGrid<T>>, mut f: impl FnMut(Point<T>) -> T) -> Result<Self> {
        let values = (0..grid.len()).map(|k| f(grid.point_of(k))).collect();
        Self::new(grid.clone(), values)
    }

    /// Skips the finiteness scan; callers guarantee finite values.
    pub(crate) fn from_trusted(grid: Arc<TorusGrid<T>>, values: Vec<T>) -> Self {
        debug_assert!(check_finite(&values).is_ok());
        Self { grid, values }
    }

    #[inline]
    pub fn grid(&self) -> &Arc<TorusGrid<T>> {
        &self.grid
    }

    #[inline]
    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> T {
        self.values[self.grid.index(i, j)]
    }

    pub fn ensure_same_grid(&self, other: &Self) -> Result<()> {
        if Arc::ptr_eq(&self.grid, &other.grid) || self.grid.same_as(&other.grid) {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Result<Self> {
        Self::new(self.grid.clone(), self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(T, T) -> T) -> Result<Self> {
        self.ensure_same_grid(other)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(&a, &b)| f(a, b))
            .collect();
        Self::new(self.grid.clone(), values)
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_map(other, |a, b| a - b)
    }

    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.zip_map(other, |a, b| a * b)
    }

    pub fn scale(&self, s: T) -> Result<Self> {
        self.map(|v| v * s)
    }

    pub fn shift(&self, c: T) -> Result<Self> {
        self.map(|v| v + c)
    }

    pub fn max(&self) -> T {
        self.values.iter().copied().fold(T::neg_infinity(), T::max)
    }

    pub fn min(&self) -> T {
        self.values.iter().copied().fold(T::infinity(), T::min)
    }

    /// Flat index of the largest sample (first one on ties).
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (k, &v) in self.values.iter().enumerate() {
            if v > self.values[best] {
                best = k;
            }
        }
        best
    }

    pub fn sup_norm(&self) -> T {
        self.values.iter().fold(T::zero(), |m, v| m.max(v.abs()))
    }

    /// Trapezoid rule on the torus: `cell_area · Σ values`.
    pub fn integrate(&self) -> T {
        self.grid.cell_area() * self.values.iter().fold(T::zero(), |s, &v| s + v)
    }

    pub fn mean(&self) -> T {
        self.integrate() / self.grid.area()
    }

    /// `sqrt(∫ f² dV)`.
    pub fn l2_norm(&self) -> T {
        (self.grid.cell_area() * self.values.iter().fold(T::zero(), |s, &v| s + v * v)).sqrt()
    }

    /// `∫ f g dV`.
    pub fn inner(&self, other: &Self) -> Result<T> {
        self.ensure_same_grid(other)?;
        Ok(self.grid.cell_area()
            * self
                .values
                .iter()
                .zip(&other.values)
                .fold(T::zero(), |s, (&a, &b)| s + a * b))
    }

    /// Largest pointwise difference.
    pub fn distance_sup(&self, other: &Self) -> Result<T> {
        self.ensure_same_grid(other)?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .fold(T::zero(), |m, (&a, &b)| m.max((a - b).abs())))
    }

    /// Copy with zero mean.
    pub fn zero_mean(&self) -> Self {
        let m = self.mean();
        Self::from_trusted(self.grid.clone(), self.values.iter().map(|&v| v - m).collect())
    }

    /// Mass of `f` over the geodesic ball: samples whose distance to `center` is at most `radius`.
    pub fn ball_mass(&self, center: Point<T>, radius: T) -> Result<T> {
        let g = &self.grid;
        if !(radius > T::zero() && radius <= g.side_length() * T::lit(0.5)) {
            return Err(Error::Parameter(format!("ball radius {radius} outside (0, L/2]")));
        }
        let n = g.n();
        let mut sum = T::zero();
        for i in 0..n {
            for j in 0..n {
                if g.sample_distance(center, i, j) <= radius {
                    sum = sum + self.values[i * n + j];
                }
            }
        }
        Ok(sum * g.cell_area())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn grid(n: usize) -> Arc<TorusGrid<f64>> {
        TorusGrid::standard(n).unwrap()
    }

    #[test]
    fn rejects_non_finite() {
        let g = grid(8);
        let mut v = vec![0.0; 64];
        v[5] = f64::NAN;
        assert!(matches!(Field::new(g.clone(), v), Err(Error::NonFinite { index: 5 })));
        let f = Field::constant(&g, 800.0).unwrap();
        assert!(f.map(f64::exp).is_err());
    }

    #[test]
    fn rejects_mismatched_grids() {
        let a = Field::zeros(&grid(8));
        let b = Field::zeros(&grid(16));
        assert!(matches!(a.add(&b), Err(Error::GridMismatch)));
        // Separately constructed but identical grids combine.
        let c = Field::zeros(&grid(8));
        assert!(a.add(&c).is_ok());
    }

    #[test]
    fn integrate_examples() {
        let g = grid(32);
        let one = Field::constant(&g, 1.0).unwrap();
        assert!((one.integrate() - 4.0 * PI * PI).abs() < 1e-12);
        let c = Field::from_fn(&g, |x, _| x.cos()).unwrap();
        assert!(c.integrate().abs() < 1e-12);
    }

    #[test]
    fn ball_mass_of_unit_density_is_disk_area() {
        let g = grid(512);
        let one = Field::constant(&g, 1.0).unwrap();
        let r = 0.5;
        let m = one.ball_mass(g.point(PI, PI), r).unwrap();
        let rel = (m - PI * r * r).abs() / (PI * r * r);
        // Lattice-point count error is of order perimeter * h / area.
        let bound = 2.0 * PI * r * g.spacing() / (PI * r * r);
        assert!(rel < bound, "rel {rel} bound {bound}");
    }

    #[test]
    fn ball_mass_containment_and_range() {
        let g = grid(32);
        let f = Field::from_fn(&g, |x, y| 1.0 + 0.5 * (x + 2.0 * y).sin()).unwrap();
        let m = f.ball_mass(g.point(1.0, 2.0), PI).unwrap();
        assert!(m <= f.integrate());
        assert!(f.ball_mass(g.point(0.0, 0.0), 0.0).is_err());
        assert!(f.ball_mass(g.point(0.0, 0.0), PI + 1e-9).is_err());
    }
}
