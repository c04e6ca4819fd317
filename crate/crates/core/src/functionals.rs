//! Variational quantities of the mean-field problem and the analytic inequality monitors.

use crate::error::{Error, Result};
use crate::grid::Field;
use crate::scalar::{lit, Scalar};

/// `ρ`, the background `Q` with `∫Q = ρ`, and the optional positive weight `f`.
#[derive(Debug, Clone)]
pub struct ProblemData<T: Scalar> {
    rho: T,
    q: Field<T>,
    f_weight: Option<Field<T>>,
}

impl<T: Scalar> ProblemData<T> {
    /// Builds the problem, shifting `q` by a constant so that `∫Q = ρ` holds on the grid.
    pub fn new(rho: T, q: Field<T>, f_weight: Option<Field<T>>) -> Result<Self> {
        if !rho.is_finite() {
            return Err(Error::Parameter("rho must be finite".into()));
        }
        if let Some(f) = &f_weight {
            q.ensure_same_grid(f)?;
            if f.min() <= T::zero() {
                return Err(Error::Parameter("weight f must be strictly positive".into()));
            }
        }
        let defect = (q.integrate() - rho) / q.grid().area();
        let q = q.shift(-defect)?;
        Ok(Self { rho, q, f_weight })
    }

    /// `Q ≡ ρ/|M|`.
    pub fn constant(grid: &std::sync::Arc<crate::grid::TorusGrid<T>>, rho: T) -> Result<Self> {
        let q = Field::constant(grid, rho / grid.area())?;
        Self::new(rho, q, None)
    }

    #[inline]
    pub fn rho(&self) -> T {
        self.rho
    }

    #[inline]
    pub fn q(&self) -> &Field<T> {
        &self.q
    }

    pub fn f_weight(&self) -> Option<&Field<T>> {
        self.f_weight.as_ref()
    }

    pub fn grid(&self) -> &std::sync::Arc<crate::grid::TorusGrid<T>> {
        self.q.grid()
    }
}

fn check_overflow<T: Scalar>(v: &Field<T>) -> Result<()> {
    let v_max = v.max();
    if v_max.as_f64() > T::OVERFLOW_EXPONENT {
        return Err(Error::BlowUpOverflow { v_max: v_max.as_f64() });
    }
    Ok(())
}

/// `e^v`, refusing exponents that would overflow.
pub fn exp_field<T: Scalar>(v: &Field<T>) -> Result<Field<T>> {
    check_overflow(v)?;
    v.map(T::exp)
}

/// `∫ e^v dV`.
pub fn volume<T: Scalar>(v: &Field<T>) -> Result<T> {
    Ok(exp_field(v)?.integrate())
}

/// `J_ρ(v) = ½∫|∇v|² + ∫Qv − ρ ln ∫e^v`.
pub fn energy_j<T: Scalar>(p: &ProblemData<T>, v: &Field<T>) -> Result<T> {
    let vol = volume(v)?;
    Ok(lit::<T>(0.5) * v.dirichlet() + p.q().inner(v)? - p.rho() * vol.ln())
}

/// `I_ρ(u) = ½∫|∇u|² + (ρ/|M|)∫u − ρ log ∫ f e^u`.
pub fn energy_i<T: Scalar>(p: &ProblemData<T>, u: &Field<T>) -> Result<T> {
    let eu = exp_field(u)?;
    let weighted = match p.f_weight() {
        Some(f) => f.mul(&eu)?.integrate(),
        None => eu.integrate(),
    };
    let area = u.grid().area();
    Ok(lit::<T>(0.5) * u.dirichlet() + p.rho() / area * u.integrate() - p.rho() * weighted.ln())
}

/// Maps `u` to `v = u + log f` together with the induced `Q = ρ/|M| + Δ log f`.
pub fn change_of_variables<T: Scalar>(p: &ProblemData<T>, u: &Field<T>) -> Result<(Field<T>, Field<T>)> {
    let area = u.grid().area();
    let log_f = match p.f_weight() {
        Some(f) => {
            if f.min() <= T::zero() {
                return Err(Error::Parameter("weight f must be strictly positive".into()));
            }
            f.map(T::ln)?
        }
        None => Field::zeros(u.grid()),
    };
    let v = u.add(&log_f)?;
    let q = log_f.laplacian().shift(p.rho() / area)?;
    Ok((v, q))
}

/// `∫ v̇² e^v dV`, the energy dissipation rate.
pub fn dissipation<T: Scalar>(v: &Field<T>, v_dot: &Field<T>) -> Result<T> {
    let ev = exp_field(v)?;
    let sq = v_dot.mul(v_dot)?;
    sq.inner(&ev)
}

/// The L² gradient of `J_ρ`: `−Δv + Q − ρ e^v / ∫e^v`.
pub fn first_variation<T: Scalar>(p: &ProblemData<T>, v: &Field<T>) -> Result<Field<T>> {
    let ev = exp_field(v)?;
    let vol = ev.integrate();
    let lap = v.laplacian();
    let rho = p.rho();
    let values = lap
        .values()
        .iter()
        .zip(p.q().values())
        .zip(ev.values())
        .map(|((&l, &q), &e)| -l + q - rho * e / vol)
        .collect();
    Field::new(v.grid().clone(), values)
}

/// `log ∫ e^{v − v̄} dV`; by Jensen it is at least `log |M|`.
pub fn jensen_log_volume<T: Scalar>(v: &Field<T>) -> Result<T> {
    let centered = v.zero_mean();
    Ok(volume(&centered)?.ln())
}

/// `(1/16π)∫|∇v|² + C − log ∫ e^{v − v̄}`. Only its trend is meaningful; `c_mt` is not the
/// sharp constant.
pub fn moser_trudinger_gap<T: Scalar>(v: &Field<T>, c_mt: T) -> Result<T> {
    let sixteen_pi = lit::<T>(16.0) * T::PI();
    Ok(v.dirichlet() / sixteen_pi + c_mt - jensen_log_volume(v)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::TorusGrid;
    use std::f64::consts::PI;
    use std::sync::Arc;

    // 4π² I₀(1), I₀(1) = 1.2660658777520082 (adaptive quadrature of (1/π)∫₀^π e^{cos θ} dθ).
    const TORUS_EXP_COS: f64 = 4.0 * PI * PI * 1.266_065_877_752_008_2;

    fn grid(n: usize) -> Arc<TorusGrid<f64>> {
        TorusGrid::standard(n).unwrap()
    }

    #[test]
    fn q_is_normalized_to_rho() {
        let g = grid(32);
        let q = Field::from_fn(&g, |x, _| 3.0 + x.sin()).unwrap();
        let p = ProblemData::new(2.0, q, None).unwrap();
        assert!((p.q().integrate() - 2.0).abs() < 1e-10);
    }

    #[test]
    fn weight_must_be_positive() {
        let g = grid(16);
        let q = Field::constant(&g, 0.1).unwrap();
        let f = Field::from_fn(&g, |x, _| x.cos()).unwrap();
        assert!(ProblemData::new(1.0, q, Some(f)).is_err());
    }

    #[test]
    fn volume_examples() {
        let g = grid(32);
        let area = 4.0 * PI * PI;
        assert!((volume(&Field::zeros(&g)).unwrap() - area).abs() < 1e-12);
        let v = Field::constant(&g, 2f64.ln()).unwrap();
        assert!((volume(&v).unwrap() - 2.0 * area).abs() < 1e-12);
        let v = Field::from_fn(&g, |x, _| x.cos()).unwrap();
        assert!((volume(&v).unwrap() - TORUS_EXP_COS).abs() < 1e-11);
    }

    #[test]
    fn volume_refuses_overflow() {
        let g = grid(8);
        let v = Field::from_fn(&g, |x, _| if x == 0.0 { 701.0 } else { 0.0 }).unwrap();
        assert!(matches!(volume(&v), Err(Error::BlowUpOverflow { .. })));
    }

    #[test]
    fn energy_of_constant_problem_at_zero() {
        let g = grid(32);
        let rho = 4.0 * PI;
        let p = ProblemData::constant(&g, rho).unwrap();
        let j = energy_j(&p, &Field::zeros(&g)).unwrap();
        assert!((j + rho * (4.0 * PI * PI).ln()).abs() < 1e-12);
        let i0 = energy_i(&p, &Field::zeros(&g)).unwrap();
        let ic = energy_i(&p, &Field::constant(&g, 1.7).unwrap()).unwrap();
        assert!((i0 - j).abs() < 1e-12 && (ic - j).abs() < 1e-11);
    }

    #[test]
    fn energy_i_with_exponential_weight() {
        let g = grid(32);
        let rho = 4.0 * PI;
        let f = Field::from_fn(&g, |x, _| x.cos().exp()).unwrap();
        let q = Field::constant(&g, rho / (4.0 * PI * PI)).unwrap();
        let p = ProblemData::new(rho, q, Some(f)).unwrap();
        let i = energy_i(&p, &Field::zeros(&g)).unwrap();
        assert!((i + rho * TORUS_EXP_COS.ln()).abs() < 1e-11);
    }

    #[test]
    fn change_of_variables_examples() {
        let g = grid(32);
        let rho = 3.0;
        let base = rho / (4.0 * PI * PI);
        let u = Field::from_fn(&g, |x, y| (x + y).sin()).unwrap();
        let q = Field::constant(&g, base).unwrap();

        let p = ProblemData::new(rho, q.clone(), None).unwrap();
        let (v, qi) = change_of_variables(&p, &u).unwrap();
        assert!(v.distance_sup(&u).unwrap() < 1e-15);
        assert!(qi.values().iter().all(|&x| (x - base).abs() < 1e-14));

        let two = Field::constant(&g, 2.0).unwrap();
        let p = ProblemData::new(rho, q.clone(), Some(two)).unwrap();
        let (v, qi) = change_of_variables(&p, &u).unwrap();
        assert!(v.distance_sup(&u.shift(2f64.ln()).unwrap()).unwrap() < 1e-14);
        assert!(qi.values().iter().all(|&x| (x - base).abs() < 1e-13));

        let f = Field::from_fn(&g, |x, _| x.cos().exp()).unwrap();
        let p = ProblemData::new(rho, q, Some(f)).unwrap();
        let (_, qi) = change_of_variables(&p, &u).unwrap();
        let expect = Field::from_fn(&g, |x, _| base - x.cos()).unwrap();
        assert!(qi.distance_sup(&expect).unwrap() < 1e-12);
        assert!((qi.integrate() - rho).abs() < 1e-8);
    }

    #[test]
    fn energy_i_equals_energy_j_for_trivial_weight() {
        let g = grid(32);
        let rho = 5.0;
        let p = ProblemData::constant(&g, rho).unwrap();
        let u = Field::from_fn(&g, |x, y| 0.4 * (2.0 * x).sin() - 0.2 * (x + y).cos()).unwrap();
        let i = energy_i(&p, &u).unwrap();
        let j = energy_j(&p, &u).unwrap();
        assert!((i - j).abs() <= 1e-12 * j.abs().max(1.0));
    }

    #[test]
    fn dissipation_examples() {
        let g = grid(16);
        let zero = Field::zeros(&g);
        assert_eq!(dissipation(&zero, &zero).unwrap(), 0.0);
        let one = Field::constant(&g, 1.0).unwrap();
        assert!((dissipation(&zero, &one).unwrap() - 4.0 * PI * PI).abs() < 1e-12);
    }

    #[test]
    fn moser_trudinger_and_jensen_examples() {
        let g = grid(32);
        let area = 4.0 * PI * PI;
        let gap0 = moser_trudinger_gap(&Field::zeros(&g), 0.0).unwrap();
        assert!((gap0 + area.ln()).abs() < 1e-12);
        let gap = |a: f64| {
            let v = Field::from_fn(&g, |x, _| a * x.cos()).unwrap();
            let dirichlet_term = v.dirichlet() / (16.0 * PI);
            (moser_trudinger_gap(&v, 0.0).unwrap(), dirichlet_term)
        };
        let (g1, d1) = gap(0.1);
        let (g2, d2) = gap(0.2);
        assert!(g1.is_finite() && g2.is_finite());
        assert!(g1 - g2 < d2 - d1);
        for a in [0.0, 0.1, 0.5, 3.0] {
            let v = Field::from_fn(&g, |x, y| a * (x.cos() + (2.0 * y).sin())).unwrap();
            assert!(jensen_log_volume(&v).unwrap() >= area.ln() - 1e-10);
        }
    }
}
