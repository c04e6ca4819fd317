use crate::error::{Error, Result};
use crate::scalar::{lit, Scalar};

use super::field::Field;
use super::torus::Point;

/// Catmull–Rom weights for the four nodes around fractional offset `t ∈ [0, 1)`.
fn cubic_weights<T: Scalar>(t: T) -> [T; 4] {
    let t2 = t * t;
    let t3 = t2 * t;
    let half = lit::<T>(0.5);
    [
        half * (-t3 + lit::<T>(2.0) * t2 - t),
        half * (lit::<T>(3.0) * t3 - lit::<T>(5.0) * t2 + lit::<T>(2.0)),
        half * (lit::<T>(-3.0) * t3 + lit::<T>(4.0) * t2 + t),
        half * (t3 - t2),
    ]
}

impl<T: Scalar> Field<T> {
    /// Periodic bicubic (Catmull–Rom) interpolation at an arbitrary point.
    pub fn interpolate(&self, p: Point<T>) -> T {
        let g = self.grid();
        let n = g.n() as isize;
        let h = g.spacing();
        let p = g.point(p.x, p.y);
        let (fx, fy) = (p.x / h, p.y / h);
        let (ix, iy) = (fx.floor(), fy.floor());
        let wx = cubic_weights(fx - ix);
        let wy = cubic_weights(fy - iy);
        let (ix, iy) = (ix.to_isize().unwrap_or(0), iy.to_isize().unwrap_or(0));
        let mut acc = T::zero();
        for (a, &wa) in wx.iter().enumerate() {
            let i = (ix + a as isize - 1).rem_euclid(n) as usize;
            let mut row = T::zero();
            for (b, &wb) in wy.iter().enumerate() {
                let j = (iy + b as isize - 1).rem_euclid(n) as usize;
                row = row + wb * self.at(i, j);
            }
            acc = acc + wa * row;
        }
        acc
    }

    /// Samples the blow-up rescaling `f(center + r ξ) + 2 log r` on the uniform `m × m`
    /// window `ξ ∈ [−w, w]²`; entry `a * m + b` corresponds to `ξ = (ξ_a, ξ_b)`.
    pub fn rescale_sample(&self, center: Point<T>, r: T, window_radius: T, m: usize) -> Result<Vec<T>> {
        let g = self.grid();
        if !(r > T::zero()) || !(window_radius > T::zero()) || m < 2 {
            return Err(Error::Parameter("rescale needs r > 0, window > 0 and m >= 2".into()));
        }
        if r * window_radius > g.side_length() * lit(0.5) {
            return Err(Error::Parameter(format!(
                "rescaled window r·w = {} exceeds L/2",
                r * window_radius
            )));
        }
        let shift = lit::<T>(2.0) * r.ln();
        let xi = window_axis(window_radius, m);
        let mut out = Vec::with_capacity(m * m);
        for &a in &xi {
            for &b in &xi {
                let p = Point {
                    x: center.x + r * a,
                    y: center.y + r * b,
                };
                out.push(self.interpolate(p) + shift);
            }
        }
        Ok(out)
    }
}

/// Node coordinates `−w + 2w·i/(m−1)` of a rescaling window.
pub fn window_axis<T: Scalar>(window_radius: T, m: usize) -> Vec<T> {
    let step = lit::<T>(2.0) * window_radius / lit((m - 1) as f64);
    (0..m).map(|i| -window_radius + step * lit(i as f64)).collect()
}
