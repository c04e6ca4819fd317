//! Fourier-space differential operators on the torus.
//!
//! Second-order operators keep the Nyquist mode; first derivatives zero it so that
//! `∂x` maps real fields to real fields.

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

use super::field::Field;
use super::torus::{Point, TorusGrid};

fn transpose<T: Copy>(buf: &mut [T], n: usize) {
    for i in 0..n {
        for j in (i + 1)..n {
            buf.swap(i * n + j, j * n + i);
        }
    }
}

impl<T: Scalar> TorusGrid<T> {
    /// Unnormalized 2-D forward transform of a row-major real array.
    pub(crate) fn fft2(&self, values: &[T]) -> Vec<Complex<T>> {
        let n = self.n();
        let mut buf: Vec<Complex<T>> = values.iter().map(|&v| Complex::new(v, T::zero())).collect();
        let mut scratch = vec![Complex::new(T::zero(), T::zero()); self.forward.get_inplace_scratch_len()];
        self.forward.process_with_scratch(&mut buf, &mut scratch);
        transpose(&mut buf, n);
        self.forward.process_with_scratch(&mut buf, &mut scratch);
        transpose(&mut buf, n);
        buf
    }

    /// Inverse of [`fft2`](Self::fft2), returning the real part.
    pub(crate) fn ifft2_real(&self, mut buf: Vec<Complex<T>>) -> Vec<T> {
        let n = self.n();
        let mut scratch = vec![Complex::new(T::zero(), T::zero()); self.inverse.get_inplace_scratch_len()];
        self.inverse.process_with_scratch(&mut buf, &mut scratch);
        transpose(&mut buf, n);
        self.inverse.process_with_scratch(&mut buf, &mut scratch);
        transpose(&mut buf, n);
        let norm = T::one() / T::lit(self.len() as f64);
        buf.into_iter().map(|c| c.re * norm).collect()
    }

    /// `|k|²` of spectral index `(p, q)`.
    #[inline]
    pub(crate) fn k_sq(&self, p: usize, q: usize) -> T {
        let k = self.wavenumbers();
        k[p] * k[p] + k[q] * k[q]
    }

    /// Multiplies the spectrum of `values` by a real radial-or-not symbol `s(p, q)`.
    pub(crate) fn apply_symbol(&self, values: &[T], symbol: impl Fn(usize, usize) -> T) -> Vec<T> {
        let n = self.n();
        let mut spec = self.fft2(values);
        for p in 0..n {
            for q in 0..n {
                spec[p * n + q] = spec[p * n + q] * symbol(p, q);
            }
        }
        self.ifft2_real(spec)
    }

    /// Solves `(c − dt Δ) x = b` exactly in Fourier space. Requires `c > 0`.
    pub(crate) fn solve_shifted_laplacian(&self, b: &[T], c: T, dt: T) -> Vec<T> {
        self.apply_symbol(b, |p, q| T::one() / (c + dt * self.k_sq(p, q)))
    }

    /// Raw Laplacian of a sample vector.
    pub(crate) fn laplacian_raw(&self, values: &[T]) -> Vec<T> {
        self.apply_symbol(values, |p, q| -self.k_sq(p, q))
    }

    /// `∫ |∇f|² dV` evaluated through Parseval with the same symbol as the Laplacian.
    pub(crate) fn dirichlet_raw(&self, values: &[T]) -> T {
        let n = self.n();
        let spec = self.fft2(values);
        let mut s = T::zero();
        for p in 0..n {
            for q in 0..n {
                s = s + self.k_sq(p, q) * spec[p * n + q].norm_sqr();
            }
        }
        s * self.cell_area() / T::lit(self.len() as f64)
    }

    /// Circular convolution of `values` with the indicator of the sample-centered disk of
    /// the given radius: entry `k` is the ball mass centered at sample `k`.
    pub(crate) fn ball_mass_map_raw(&self, values: &[T], radius: T) -> Vec<T> {
        let n = self.n();
        let origin = Point { x: T::zero(), y: T::zero() };
        let mut mask = vec![T::zero(); self.len()];
        for i in 0..n {
            for j in 0..n {
                if self.sample_distance(origin, i, j) <= radius {
                    mask[i * n + j] = T::one();
                }
            }
        }
        let fs = self.fft2(values);
        let ms = self.fft2(&mask);
        // The disk is symmetric, so correlation and convolution coincide.
        let prod = fs.iter().zip(&ms).map(|(a, b)| a * b).collect();
        self.ifft2_real(prod).into_iter().map(|v| v * self.cell_area()).collect()
    }
}

fn derivative<T: Scalar>(f: &Field<T>, axis: usize) -> Vec<T> {
    let g = f.grid();
    let n = g.n();
    let k = g.wavenumbers();
    let mut spec = g.fft2(f.values());
    for p in 0..n {
        for q in 0..n {
            let idx = if axis == 0 { p } else { q };
            let factor = if idx == n / 2 { T::zero() } else { k[idx] };
            let c = spec[p * n + q];
            // multiply by i k
            spec[p * n + q] = Complex::new(-c.im * factor, c.re * factor);
        }
    }
    g.ifft2_real(spec)
}

impl<T: Scalar> Field<T> {
    /// Spectral Laplacian. The result has zero mean to rounding.
    pub fn laplacian(&self) -> Field<T> {
        Field::from_trusted(self.grid().clone(), self.grid().laplacian_raw(self.values()))
    }

    /// `(∂x f, ∂y f)` with the Nyquist mode removed.
    pub fn gradient(&self) -> (Field<T>, Field<T>) {
        (
            Field::from_trusted(self.grid().clone(), derivative(self, 0)),
            Field::from_trusted(self.grid().clone(), derivative(self, 1)),
        )
    }

    /// Pointwise `|∇f|²`.
    pub fn grad_sq(&self) -> Field<T> {
        let (dx, dy) = self.gradient();
        let values = dx.values().iter().zip(dy.values()).map(|(&a, &b)| a * a + b * b).collect();
        Field::from_trusted(self.grid().clone(), values)
    }

    /// Pointwise `∇f · ∇g`.
    pub fn grad_dot(&self, other: &Field<T>) -> Result<Field<T>> {
        self.ensure_same_grid(other)?;
        let (fx, fy) = self.gradient();
        let (gx, gy) = other.gradient();
        let values = (0..fx.values().len())
            .map(|k| fx.values()[k] * gx.values()[k] + fy.values()[k] * gy.values()[k])
            .collect();
        Ok(Field::from_trusted(self.grid().clone(), values))
    }

    /// `∫ |∇f|² dV`, consistent with [`laplacian`](Self::laplacian): equals `−∫ f Δf`.
    pub fn dirichlet(&self) -> T {
        self.grid().dirichlet_raw(self.values())
    }

    /// Ball mass centered at every grid sample at once.
    pub fn ball_mass_map(&self, radius: T) -> Result<Field<T>> {
        let g = self.grid();
        if !(radius > T::zero() && radius <= g.side_length() * T::lit(0.5)) {
            return Err(Error::Parameter(format!("ball radius {radius} outside (0, L/2]")));
        }
        Field::new(g.clone(), g.ball_mass_map_raw(self.values(), radius))
    }
}
