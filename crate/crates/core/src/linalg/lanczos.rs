//! Spectral probes for preconditioned normal matrices.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::vector::{dot, norm2};
use super::{CholeskyFactor, CscMatrix};
use crate::error::{check_len, Error, Result};
use crate::Scalar;

/// Extreme eigenvalues of `B = L⁻¹ P M1 Pᵀ L⁻ᵀ` where `M2 = Pᵀ L Lᵀ P`.
///
/// `B` is similar to `M2^{-1/2} M1 M2^{-1/2}`. Lanczos with full
/// reorthogonalization is run for at most `iters` steps (capped at the
/// dimension); Ritz values are inner bounds of the true extremes.
pub fn generalized_extreme_eigenvalues<T: Scalar>(
    m1: &CscMatrix<T>,
    m2_factor: &CholeskyFactor<T>,
    iters: usize,
) -> Result<(T, T)> {
    let n = m1.nrows();
    check_len("probe (square)", n, m1.ncols())?;
    check_len("probe preconditioner", n, m2_factor.dim())?;
    if n == 0 {
        return Err(Error::InvalidParameter("empty matrix".into()));
    }
    let steps = iters.max(1).min(n);

    let apply = |v: &[T]| -> Result<Vec<T>> {
        let u = m2_factor.solve_upper_permuted(v)?;
        let w = m1.mul_vec(&u);
        m2_factor.solve_lower_permuted(&w)
    };

    let mut rng = ChaCha8Rng::seed_from_u64(0x1a2c_20b5);
    let mut v: Vec<T> = (0..n).map(|_| T::lit(rng.gen_range(0.5..1.5))).collect();
    let nv = norm2(&v);
    v.iter_mut().for_each(|x| *x /= nv);

    let mut basis: Vec<Vec<T>> = Vec::with_capacity(steps);
    let mut alphas: Vec<T> = Vec::with_capacity(steps);
    let mut betas: Vec<T> = Vec::with_capacity(steps);
    for _ in 0..steps {
        let mut w = apply(&v)?;
        if w.iter().any(|x| !x.is_finite()) {
            return Err(Error::NumericalBreakdown("non-finite value in Lanczos probe"));
        }
        let alpha = dot(&w, &v);
        basis.push(v.clone());
        alphas.push(alpha);
        // two passes of classical Gram-Schmidt against the whole basis
        for _ in 0..2 {
            for q in &basis {
                let h = dot(&w, q);
                for (wi, &qi) in w.iter_mut().zip(q) {
                    *wi -= h * qi;
                }
            }
        }
        let beta = norm2(&w);
        let scale = alphas.iter().fold(T::zero(), |m, a| m.max(a.abs()));
        if basis.len() == steps || beta <= T::lit(1e-12) * scale.max(T::min_positive_value()) {
            break;
        }
        betas.push(beta);
        v = w.iter().map(|&x| x / beta).collect();
    }
    Ok(tridiagonal_extreme_eigenvalues(&alphas, &betas))
}

/// Estimates `κ(M2^{-1/2} M1 M2^{-1/2})` by Lanczos; a lower bound on the
/// true condition number.
pub fn generalized_condition_probe<T: Scalar>(
    m1: &CscMatrix<T>,
    m2_factor: &CholeskyFactor<T>,
    iters: usize,
) -> Result<T> {
    let (lo, hi) = generalized_extreme_eigenvalues(m1, m2_factor, iters)?;
    if !(lo > T::zero()) {
        return Ok(T::infinity());
    }
    Ok(hi / lo)
}

/// Smallest and largest eigenvalues of the symmetric tridiagonal matrix with
/// diagonal `alpha` and off-diagonal `beta`, by Sturm-sequence bisection.
pub fn tridiagonal_extreme_eigenvalues<T: Scalar>(alpha: &[T], beta: &[T]) -> (T, T) {
    let n = alpha.len();
    debug_assert!(beta.len() + 1 >= n);
    let off = |i: usize| if i + 1 < n { beta[i].abs() } else { T::zero() };
    let mut lo = T::infinity();
    let mut hi = T::neg_infinity();
    for i in 0..n {
        let radius = off(i) + if i > 0 { off(i - 1) } else { T::zero() };
        lo = lo.min(alpha[i] - radius);
        hi = hi.max(alpha[i] + radius);
    }
    // number of eigenvalues strictly below x
    let count_below = |x: T| -> usize {
        let mut count = 0;
        let mut q = T::one();
        for i in 0..n {
            let b2 = if i > 0 { beta[i - 1] * beta[i - 1] } else { T::zero() };
            q = alpha[i] - x - if i > 0 { b2 / q } else { T::zero() };
            if q == T::zero() {
                q = T::epsilon() * (x.abs() + T::one());
            }
            if q < T::zero() {
                count += 1;
            }
        }
        count
    };
    let bisect = |index: usize| -> T {
        let (mut a, mut b) = (lo, hi);
        for _ in 0..200 {
            let mid = (a + b) / T::lit(2.0);
            if mid <= a || mid >= b {
                break;
            }
            if count_below(mid) > index {
                b = mid;
            } else {
                a = mid;
            }
        }
        (a + b) / T::lit(2.0)
    };
    (bisect(0), bisect(n - 1))
}
