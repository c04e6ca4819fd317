//! Matrix-free Krylov solvers on flat sample vectors (Euclidean inner product).

use crate::scalar::{lit, Scalar};

#[derive(Debug, Clone)]
pub struct KrylovOutcome<T> {
    pub solution: Vec<T>,
    pub iterations: usize,
    /// Final `‖b − A x‖ / ‖b‖`.
    pub relative_residual: T,
    pub converged: bool,
}

fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |s, (&x, &y)| s + x * y)
}

fn norm<T: Scalar>(a: &[T]) -> T {
    dot(a, a).sqrt()
}

/// Preconditioned conjugate gradients for a symmetric positive definite operator.
pub fn conjugate_gradient<T: Scalar>(
    apply: impl Fn(&[T]) -> Vec<T>,
    precondition: impl Fn(&[T]) -> Vec<T>,
    b: &[T],
    tol: T,
    max_iters: usize,
) -> KrylovOutcome<T> {
    let bnorm = norm(b);
    let mut x = vec![T::zero(); b.len()];
    if bnorm == T::zero() {
        return KrylovOutcome {
            solution: x,
            iterations: 0,
            relative_residual: T::zero(),
            converged: true,
        };
    }
    let mut r = b.to_vec();
    let mut z = precondition(&r);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    for it in 0..max_iters {
        let rel = norm(&r) / bnorm;
        if rel <= tol {
            return KrylovOutcome {
                solution: x,
                iterations: it,
                relative_residual: rel,
                converged: true,
            };
        }
        let ap = apply(&p);
        let pap = dot(&p, &ap);
        if !(pap > T::zero()) {
            break;
        }
        let alpha = rz / pap;
        for k in 0..x.len() {
            x[k] = x[k] + alpha * p[k];
            r[k] = r[k] - alpha * ap[k];
        }
        z = precondition(&r);
        let rz_next = dot(&r, &z);
        let beta = rz_next / rz;
        rz = rz_next;
        for k in 0..p.len() {
            p[k] = z[k] + beta * p[k];
        }
    }
    let final_rel = norm(&r) / bnorm;
    KrylovOutcome {
        solution: x,
        iterations: max_iters,
        relative_residual: final_rel,
        converged: final_rel <= tol,
    }
}

/// Right-preconditioned restarted GMRES.
///
/// `stagnation` is set when a full restart cycle fails to reduce the residual by 1%,
/// which signals a (numerically) singular operator.
pub fn gmres<T: Scalar>(
    apply: impl Fn(&[T]) -> Vec<T>,
    precondition: impl Fn(&[T]) -> Vec<T>,
    b: &[T],
    tol: T,
    restart: usize,
    max_iters: usize,
) -> (KrylovOutcome<T>, bool) {
    let len = b.len();
    let bnorm = norm(b);
    let mut x = vec![T::zero(); len];
    if bnorm == T::zero() {
        let out = KrylovOutcome {
            solution: x,
            iterations: 0,
            relative_residual: T::zero(),
            converged: true,
        };
        return (out, false);
    }
    let mut total = 0;
    let mut rel = T::one();
    let mut stagnated = false;
    while total < max_iters {
        let ax = apply(&x);
        let r: Vec<T> = b.iter().zip(&ax).map(|(&bi, &ai)| bi - ai).collect();
        let beta = norm(&r);
        rel = beta / bnorm;
        if rel <= tol {
            break;
        }
        let cycle_start = rel;
        let m = restart.min(max_iters - total);
        let mut basis: Vec<Vec<T>> = Vec::with_capacity(m + 1);
        basis.push(r.iter().map(|&v| v / beta).collect());
        let mut h = vec![vec![T::zero(); m]; m + 1];
        let (mut cs, mut sn) = (vec![T::zero(); m], vec![T::zero(); m]);
        let mut g = vec![T::zero(); m + 1];
        g[0] = beta;
        let mut preconditioned: Vec<Vec<T>> = Vec::with_capacity(m);
        let mut used = 0;
        for j in 0..m {
            let zj = precondition(&basis[j]);
            let mut w = apply(&zj);
            preconditioned.push(zj);
            for i in 0..=j {
                h[i][j] = dot(&w, &basis[i]);
                for k in 0..len {
                    w[k] = w[k] - h[i][j] * basis[i][k];
                }
            }
            h[j + 1][j] = norm(&w);
            for i in 0..j {
                let t = cs[i] * h[i][j] + sn[i] * h[i + 1][j];
                h[i + 1][j] = -sn[i] * h[i][j] + cs[i] * h[i + 1][j];
                h[i][j] = t;
            }
            let denom = h[j][j].hypot(h[j + 1][j]);
            if denom == T::zero() {
                cs[j] = T::one();
                sn[j] = T::zero();
            } else {
                cs[j] = h[j][j] / denom;
                sn[j] = h[j + 1][j] / denom;
            }
            h[j][j] = denom;
            let hj1 = h[j + 1][j];
            h[j + 1][j] = T::zero();
            g[j + 1] = -sn[j] * g[j];
            g[j] = cs[j] * g[j];
            used = j + 1;
            total += 1;
            rel = g[j + 1].abs() / bnorm;
            if rel <= tol || hj1 == T::zero() {
                break;
            }
            basis.push(w.iter().map(|&v| v / hj1).collect());
        }
        // back substitution
        let mut y = vec![T::zero(); used];
        for i in (0..used).rev() {
            let mut s = g[i];
            for k in (i + 1)..used {
                s = s - h[i][k] * y[k];
            }
            y[i] = if h[i][i] == T::zero() { T::zero() } else { s / h[i][i] };
        }
        for (i, zi) in preconditioned.iter().take(used).enumerate() {
            for k in 0..len {
                x[k] = x[k] + y[i] * zi[k];
            }
        }
        if rel <= tol {
            break;
        }
        if rel > cycle_start * lit(0.99) {
            stagnated = true;
            break;
        }
    }
    let ax = apply(&x);
    let true_rel = norm(&b.iter().zip(&ax).map(|(&bi, &ai)| bi - ai).collect::<Vec<_>>()) / bnorm;
    let converged = true_rel <= tol * lit(10.0) || rel <= tol && true_rel <= lit(1e-6);
    (
        KrylovOutcome {
            solution: x,
            iterations: total,
            relative_residual: true_rel,
            converged,
        },
        stagnated && !converged,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tridiag(x: &[f64], shift: f64) -> Vec<f64> {
        let n = x.len();
        (0..n)
            .map(|i| {
                let l = if i > 0 { x[i - 1] } else { 0.0 };
                let r = if i + 1 < n { x[i + 1] } else { 0.0 };
                (2.0 + shift) * x[i] - l - r
            })
            .collect()
    }

    #[test]
    fn cg_solves_spd_system() {
        let b: Vec<f64> = (0..50).map(|i| (i as f64 * 0.3).sin()).collect();
        let out = conjugate_gradient(|x| tridiag(x, 0.1), |r| r.to_vec(), &b, 1e-12, 500);
        assert!(out.converged);
        let ax = tridiag(&out.solution, 0.1);
        let err: f64 = ax.iter().zip(&b).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err < 1e-10);
    }

    #[test]
    fn gmres_solves_indefinite_system() {
        let b: Vec<f64> = (0..40).map(|i| (i as f64 * 0.7).cos()).collect();
        let op = |x: &[f64]| tridiag(x, -1.3);
        let (out, stagnated) = gmres(op, |r| r.to_vec(), &b, 1e-12, 60, 400);
        assert!(out.converged && !stagnated, "{:?}", out.relative_residual);
        let ax = tridiag(&out.solution, -1.3);
        let err: f64 = ax.iter().zip(&b).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err < 1e-9);
    }

    #[test]
    fn gmres_flags_singular_operator() {
        // Annihilates the second component; b has a component there.
        let op = |x: &[f64]| vec![x[0], 0.0, 2.0 * x[2]];
        let (out, stagnated) = gmres(op, |r| r.to_vec(), &[1.0, 1.0, 1.0], 1e-12, 3, 30);
        assert!(!out.converged);
        assert!(stagnated);
    }
}
