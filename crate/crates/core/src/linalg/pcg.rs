use super::vector::{axpy, dot, norm2};
use super::CholeskyFactor;
use crate::error::{check_len, Error, Result};
use crate::Scalar;

/// Result of a preconditioned conjugate gradient run.
#[derive(Clone, Debug)]
pub struct CgOutcome<T> {
    pub solution: Vec<T>,
    pub iterations: usize,
    /// `‖M·solution − rhs‖ / max(‖rhs‖, 1)`, recomputed at exit.
    pub relative_residual: T,
    pub converged: bool,
}

/// Preconditioned conjugate gradient for an SPD operator, preconditioned by a
/// Cholesky factor.
///
/// `apply_m(v, out)` must write `M v` into `out`. When the recurrence residual
/// passes `rel_tol` the true residual is recomputed; if residual drift left it
/// above tolerance the iteration restarts from the true residual.
pub fn pcg_solve<T, F>(
    mut apply_m: F,
    precond: &CholeskyFactor<T>,
    rhs: &[T],
    rel_tol: T,
    max_iter: usize,
) -> Result<CgOutcome<T>>
where
    T: Scalar,
    F: FnMut(&[T], &mut [T]),
{
    let n = rhs.len();
    check_len("pcg preconditioner", n, precond.dim())?;
    if !(rel_tol > T::zero()) {
        return Err(Error::InvalidParameter("pcg tolerance must be positive".into()));
    }
    let scale = norm2(rhs).max(T::one());
    let mut x = vec![T::zero(); n];
    let mut r = rhs.to_vec();
    let mut q = vec![T::zero(); n];

    let true_residual = |apply_m: &mut F, x: &[T], q: &mut [T]| -> Vec<T> {
        apply_m(x, q);
        rhs.iter().zip(q.iter()).map(|(&b, &mx)| b - mx).collect()
    };

    let mut iterations = 0;
    if norm2(&r) / scale > rel_tol {
        let mut z = precond.solve(&r)?;
        let mut p = z.clone();
        let mut rz = dot(&r, &z);
        while iterations < max_iter {
            apply_m(&p, &mut q);
            let pq = dot(&p, &q);
            if !pq.is_finite() || !rz.is_finite() {
                return Err(Error::NumericalBreakdown("non-finite value in conjugate gradient"));
            }
            if !(pq > T::zero()) {
                return Err(Error::NumericalBreakdown("operator is not positive definite"));
            }
            let alpha = rz / pq;
            axpy(alpha, &p, &mut x);
            axpy(-alpha, &q, &mut r);
            iterations += 1;

            if norm2(&r) / scale <= rel_tol {
                r = true_residual(&mut apply_m, &x, &mut q);
                if norm2(&r) / scale <= rel_tol {
                    break;
                }
                z = precond.solve(&r)?;
                p.copy_from_slice(&z);
                rz = dot(&r, &z);
                continue;
            }
            z = precond.solve(&r)?;
            let rz_next = dot(&r, &z);
            let beta = rz_next / rz;
            for (pi, &zi) in p.iter_mut().zip(&z) {
                *pi = zi + beta * *pi;
            }
            rz = rz_next;
        }
    }

    let r = true_residual(&mut apply_m, &x, &mut q);
    let relative_residual = norm2(&r) / scale;
    if !relative_residual.is_finite() {
        return Err(Error::NumericalBreakdown("non-finite residual in conjugate gradient"));
    }
    Ok(CgOutcome {
        solution: x,
        iterations,
        relative_residual,
        converged: relative_residual <= rel_tol,
    })
}
