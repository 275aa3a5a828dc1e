//! Matrix-free iterative linear solvers shared by the exact oracle
//! (real sparse generators) and the momentum-space hierarchy (complex
//! operators under weighted inner products).
//!
//! Both solvers are generic over the scalar (f64 or Complex64) and take the
//! inner product as a closure, so weighted inner products come for free.

use num_complex::ComplexFloat;

use crate::error::{Error, Result};

/// Outcome of an iterative solve.
#[derive(Debug, Clone)]
pub struct Solve<S> {
    pub x: Vec<S>,
    /// Final relative residual ||b - A x|| / ||b||.
    pub residual: f64,
    pub iterations: usize,
}

fn axpy<S: ComplexFloat>(y: &mut [S], a: S, x: &[S]) {
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi = *yi + a * xi;
    }
}

/// BiCGStab for a general (non-Hermitian) operator `apply: x -> A x`.
///
/// `dot(a, b)` must be the sesquilinear inner product `<a, b>` (conjugate
/// on the first slot for complex scalars).  Converges when the relative
/// residual drops below `tol`; restarts once on a breakdown of the shadow
/// residual before giving up.
pub fn bicgstab<S, F, D>(apply: F, b: &[S], tol: f64, max_iter: usize, dot: D) -> Result<Solve<S>>
where
    S: ComplexFloat<Real = f64>,
    F: Fn(&[S], &mut [S]),
    D: Fn(&[S], &[S]) -> S,
{
    let n = b.len();
    let norm = |v: &[S]| dot(v, v).re().max(0.0).sqrt();
    let bnorm = norm(b);
    if bnorm == 0.0 {
        return Ok(Solve { x: vec![S::zero(); n], residual: 0.0, iterations: 0 });
    }
    let mut x = vec![S::zero(); n];
    let mut r = b.to_vec();
    let mut rhat = r.clone();
    let mut p = vec![S::zero(); n];
    let mut v = vec![S::zero(); n];
    let mut s = vec![S::zero(); n];
    let mut t = vec![S::zero(); n];
    let (mut rho, mut alpha, mut omega) = (S::one(), S::one(), S::one());
    let mut restarted = false;
    let mut iter = 0;
    while iter < max_iter {
        iter += 1;
        let rho_new = dot(&rhat, &r);
        if rho_new.abs() < 1e-300 || omega.abs() < 1e-300 {
            if restarted {
                return Err(Error::numerical("bicgstab breakdown", norm(&r) / bnorm));
            }
            // restart with a fresh shadow residual
            rhat.copy_from_slice(&r);
            p.iter_mut().for_each(|z| *z = S::zero());
            v.iter_mut().for_each(|z| *z = S::zero());
            rho = S::one();
            alpha = S::one();
            omega = S::one();
            restarted = true;
            continue;
        }
        let beta = (rho_new / rho) * (alpha / omega);
        for i in 0..n {
            p[i] = r[i] + beta * (p[i] - omega * v[i]);
        }
        apply(&p, &mut v);
        let denom = dot(&rhat, &v);
        if denom.abs() < 1e-300 {
            return Err(Error::numerical("bicgstab breakdown (rhat.v)", norm(&r) / bnorm));
        }
        alpha = rho_new / denom;
        for i in 0..n {
            s[i] = r[i] - alpha * v[i];
        }
        if norm(&s) / bnorm < tol {
            axpy(&mut x, alpha, &p);
            return Ok(Solve { x, residual: norm(&s) / bnorm, iterations: iter });
        }
        apply(&s, &mut t);
        let tt = dot(&t, &t);
        if tt.re().abs() < 1e-300 {
            return Err(Error::numerical("bicgstab breakdown (t.t)", norm(&s) / bnorm));
        }
        omega = dot(&t, &s) / tt;
        for i in 0..n {
            x[i] = x[i] + alpha * p[i] + omega * s[i];
            r[i] = s[i] - omega * t[i];
        }
        rho = rho_new;
        let rel = norm(&r) / bnorm;
        if rel < tol {
            return Ok(Solve { x, residual: rel, iterations: iter });
        }
    }
    Err(Error::numerical("bicgstab did not converge", norm(&r) / bnorm))
}

/// Preconditioned conjugate gradient for a Hermitian positive-definite
/// operator.  `precond: r -> M^{-1} r` must also be Hermitian PD in the
/// same inner product (identity is fine).
pub fn pcg<S, F, M, D>(apply: F, precond: M, b: &[S], tol: f64, max_iter: usize, dot: D) -> Result<Solve<S>>
where
    S: ComplexFloat<Real = f64>,
    F: Fn(&[S], &mut [S]),
    M: Fn(&[S], &mut [S]),
    D: Fn(&[S], &[S]) -> S,
{
    let n = b.len();
    let norm = |v: &[S]| dot(v, v).re().max(0.0).sqrt();
    let bnorm = norm(b);
    if bnorm == 0.0 {
        return Ok(Solve { x: vec![S::zero(); n], residual: 0.0, iterations: 0 });
    }
    let mut x = vec![S::zero(); n];
    let mut r = b.to_vec();
    let mut z = vec![S::zero(); n];
    precond(&r, &mut z);
    let mut p = z.clone();
    let mut q = vec![S::zero(); n];
    let mut rz = dot(&r, &z);
    for iter in 1..=max_iter {
        apply(&p, &mut q);
        let pq = dot(&p, &q);
        if pq.abs() < 1e-300 {
            return Err(Error::numerical("pcg breakdown", norm(&r) / bnorm));
        }
        let alpha = rz / pq;
        axpy(&mut x, alpha, &p);
        axpy(&mut r, -alpha, &q);
        let rel = norm(&r) / bnorm;
        if rel < tol {
            return Ok(Solve { x, residual: rel, iterations: iter });
        }
        precond(&r, &mut z);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
        rz = rz_new;
    }
    Err(Error::numerical("pcg did not converge", norm(&r) / bnorm))
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;

    fn dot_real(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| x * y).sum()
    }

    #[test]
    fn bicgstab_small_nonsymmetric() {
        // A = [[4, 1], [-1, 3]], b = [1, 2] -> x = (1/13)[1, 9]
        let apply = |v: &[f64], out: &mut [f64]| {
            out[0] = 4.0 * v[0] + v[1];
            out[1] = -v[0] + 3.0 * v[1];
        };
        let sol = bicgstab(apply, &[1.0, 2.0], 1e-12, 100, dot_real).unwrap();
        assert!((sol.x[0] - 1.0 / 13.0).abs() < 1e-10);
        assert!((sol.x[1] - 9.0 / 13.0).abs() < 1e-10);
    }

    #[test]
    fn pcg_diagonal_complex() {
        let d = [2.0, 5.0, 9.0];
        let apply = |v: &[Complex64], out: &mut [Complex64]| {
            for i in 0..3 {
                out[i] = d[i] * v[i];
            }
        };
        let ident = |r: &[Complex64], z: &mut [Complex64]| z.copy_from_slice(r);
        let dot = |a: &[Complex64], b: &[Complex64]| -> Complex64 {
            a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
        };
        let b = [Complex64::new(1.0, 1.0), Complex64::new(0.0, 2.0), Complex64::new(3.0, 0.0)];
        let sol = pcg(apply, ident, &b, 1e-13, 50, dot).unwrap();
        for i in 0..3 {
            assert!((sol.x[i] - b[i] / d[i]).norm() < 1e-11);
        }
    }

    #[test]
    fn zero_rhs() {
        let apply = |v: &[f64], out: &mut [f64]| out.copy_from_slice(v);
        let sol = bicgstab(apply, &[0.0, 0.0], 1e-12, 10, dot_real).unwrap();
        assert_eq!(sol.x, vec![0.0, 0.0]);
        assert_eq!(sol.iterations, 0);
    }
}
