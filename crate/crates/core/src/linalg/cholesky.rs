//! Sparse up-looking Cholesky factorization with a cached symbolic analysis.

use super::ordering::{invert_permutation, minimum_degree};
use super::CscMatrix;
use crate::error::{check_len, Error, Result};
use crate::Scalar;

/// Retries with escalating diagonal regularization before giving up.
pub const MAX_REGULARIZATION_RETRIES: usize = 10;

/// Symbolic analysis of a symmetric sparsity pattern: ordering, elimination
/// tree and column layout of `L`. Reusable across matrices sharing the pattern.
#[derive(Clone, Debug)]
pub struct SymbolicCholesky {
    n: usize,
    perm: Vec<usize>,
    parent: Vec<usize>,
    // Upper triangle of P M Pᵀ, with the source position in M's value array.
    c_col_ptr: Vec<usize>,
    c_row_idx: Vec<usize>,
    c_source: Vec<usize>,
    l_col_ptr: Vec<usize>,
    pattern_col_ptr: Vec<usize>,
    pattern_row_idx: Vec<usize>,
}

const NO_PARENT: usize = usize::MAX;

impl SymbolicCholesky {
    /// Orders `m` by minimum degree and analyzes the permuted pattern.
    pub fn analyze<T: Scalar>(m: &CscMatrix<T>) -> Result<Self> {
        let perm = minimum_degree(m);
        Self::analyze_with_ordering(m, perm)
    }

    pub fn analyze_with_ordering<T: Scalar>(m: &CscMatrix<T>, perm: Vec<usize>) -> Result<Self> {
        check_len("cholesky (square)", m.nrows(), m.ncols())?;
        let n = m.ncols();
        check_len("cholesky permutation", n, perm.len())?;
        let pinv = invert_permutation(&perm);

        // upper triangle of C = P M Pᵀ
        let mut counts = vec![0usize; n];
        for j in 0..n {
            for &i in m.col(j).0 {
                let (pi, pj) = (pinv[i], pinv[j]);
                if pi <= pj {
                    counts[pj] += 1;
                }
            }
        }
        let mut c_col_ptr = vec![0usize; n + 1];
        for j in 0..n {
            c_col_ptr[j + 1] = c_col_ptr[j] + counts[j];
        }
        let mut next = c_col_ptr.clone();
        let mut c_row_idx = vec![0usize; c_col_ptr[n]];
        let mut c_source = vec![0usize; c_col_ptr[n]];
        for j in 0..n {
            let start = m.col_ptr()[j];
            for (off, &i) in m.col(j).0.iter().enumerate() {
                let (pi, pj) = (pinv[i], pinv[j]);
                if pi <= pj {
                    c_row_idx[next[pj]] = pi;
                    c_source[next[pj]] = start + off;
                    next[pj] += 1;
                }
            }
        }

        let parent = elimination_tree(n, &c_col_ptr, &c_row_idx);

        // column counts of L from the row patterns
        let mut l_counts = vec![1usize; n];
        let mut stack = vec![0usize; n];
        let mut mark = vec![usize::MAX; n];
        for k in 0..n {
            let top = ereach(k, &c_col_ptr, &c_row_idx, &parent, &mut stack, &mut mark);
            for &i in &stack[top..] {
                l_counts[i] += 1;
            }
        }
        let mut l_col_ptr = vec![0usize; n + 1];
        for j in 0..n {
            l_col_ptr[j + 1] = l_col_ptr[j] + l_counts[j];
        }

        Ok(Self {
            n,
            perm,
            parent,
            c_col_ptr,
            c_row_idx,
            c_source,
            l_col_ptr,
            pattern_col_ptr: m.col_ptr().to_vec(),
            pattern_row_idx: m.row_idx().to_vec(),
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn permutation(&self) -> &[usize] {
        &self.perm
    }

    /// Number of nonzeros the factor will hold.
    pub fn factor_nnz(&self) -> usize {
        self.l_col_ptr[self.n]
    }

    pub fn matches_pattern<T: Scalar>(&self, m: &CscMatrix<T>) -> bool {
        m.nrows() == self.n
            && m.ncols() == self.n
            && m.col_ptr() == self.pattern_col_ptr.as_slice()
            && m.row_idx() == self.pattern_row_idx.as_slice()
    }

    /// Numeric factorization with regularization escalation.
    ///
    /// A first attempt uses no shift. If some pivot falls below `min_pivot`,
    /// the diagonal shift starts at `1e-12·max|M_ii|` and grows by a decade per
    /// retry, up to [`MAX_REGULARIZATION_RETRIES`] retries.
    pub fn factorize<T: Scalar>(&self, m: &CscMatrix<T>, min_pivot: T) -> Result<CholeskyFactor<T>> {
        if !self.matches_pattern(m) {
            return Err(Error::InvalidParameter(
                "matrix pattern differs from the analyzed pattern".into(),
            ));
        }
        let max_diag = m.max_abs_diag();
        let base = if max_diag > T::zero() && max_diag.is_finite() {
            T::lit(1e-12) * max_diag
        } else {
            T::lit(1e-12)
        };
        let mut sigma = T::zero();
        for attempt in 0..=MAX_REGULARIZATION_RETRIES {
            if let Some(l) = self.numeric(m, sigma, min_pivot) {
                return Ok(CholeskyFactor {
                    perm: self.perm.clone(),
                    l,
                    diag_regularization: sigma,
                });
            }
            sigma = if attempt == 0 { base } else { sigma * T::lit(10.0) };
        }
        Err(Error::FactorizationFailed {
            regularization: (sigma / T::lit(10.0)).to_f64_lossy(),
        })
    }

    fn numeric<T: Scalar>(&self, m: &CscMatrix<T>, sigma: T, min_pivot: T) -> Option<CscMatrix<T>> {
        let n = self.n;
        let nnz = self.factor_nnz();
        let mut li = vec![0usize; nnz];
        let mut lx = vec![T::zero(); nnz];
        let mut next: Vec<usize> = self.l_col_ptr[..n].to_vec();
        let mut x = vec![T::zero(); n];
        let mut stack = vec![0usize; n];
        let mut mark = vec![usize::MAX; n];
        let mvals = m.values();

        for k in 0..n {
            let top = ereach(k, &self.c_col_ptr, &self.c_row_idx, &self.parent, &mut stack, &mut mark);
            x[k] = T::zero();
            for p in self.c_col_ptr[k]..self.c_col_ptr[k + 1] {
                x[self.c_row_idx[p]] += mvals[self.c_source[p]];
            }
            let mut d = x[k] + sigma;
            x[k] = T::zero();
            for &i in &stack[top..] {
                let lki = x[i] / lx[self.l_col_ptr[i]];
                x[i] = T::zero();
                for p in self.l_col_ptr[i] + 1..next[i] {
                    x[li[p]] -= lx[p] * lki;
                }
                d -= lki * lki;
                let p = next[i];
                next[i] += 1;
                li[p] = k;
                lx[p] = lki;
            }
            if !(d >= min_pivot) || !(d > T::zero()) || !d.is_finite() {
                return None;
            }
            let p = next[k];
            next[k] += 1;
            li[p] = k;
            lx[p] = d.sqrt();
        }
        Some(CscMatrix::from_parts_unchecked(
            n,
            n,
            self.l_col_ptr.clone(),
            li,
            lx,
        ))
    }
}

/// Elimination tree of the matrix whose upper triangle is given column-wise.
fn elimination_tree(n: usize, col_ptr: &[usize], row_idx: &[usize]) -> Vec<usize> {
    let mut parent = vec![NO_PARENT; n];
    let mut ancestor = vec![NO_PARENT; n];
    for k in 0..n {
        for &start in &row_idx[col_ptr[k]..col_ptr[k + 1]] {
            let mut i = start;
            while i != NO_PARENT && i < k {
                let next = ancestor[i];
                ancestor[i] = k;
                if next == NO_PARENT {
                    parent[i] = k;
                    break;
                }
                i = next;
            }
        }
    }
    parent
}

/// Nonzero pattern of row `k` of `L`, written to `stack[top..]` in
/// topological order. `mark` is stamped with `k`.
fn ereach(
    k: usize,
    col_ptr: &[usize],
    row_idx: &[usize],
    parent: &[usize],
    stack: &mut [usize],
    mark: &mut [usize],
) -> usize {
    let n = parent.len();
    let mut top = n;
    mark[k] = k;
    let mut path: Vec<usize> = Vec::new();
    for &start in &row_idx[col_ptr[k]..col_ptr[k + 1]] {
        if start > k {
            continue;
        }
        let mut i = start;
        path.clear();
        while mark[i] != k {
            path.push(i);
            mark[i] = k;
            i = parent[i];
            if i == NO_PARENT {
                break;
            }
        }
        while let Some(v) = path.pop() {
            top -= 1;
            stack[top] = v;
        }
    }
    top
}

/// Sparse Cholesky factor: `P M Pᵀ + σ I = L Lᵀ`.
#[derive(Clone, Debug)]
pub struct CholeskyFactor<T> {
    perm: Vec<usize>,
    l: CscMatrix<T>,
    diag_regularization: T,
}

impl<T: Scalar> CholeskyFactor<T> {
    /// One-shot analysis plus factorization.
    pub fn factorize(m: &CscMatrix<T>, min_pivot: T) -> Result<Self> {
        SymbolicCholesky::analyze(m)?.factorize(m, min_pivot)
    }

    pub fn dim(&self) -> usize {
        self.perm.len()
    }

    /// Fill-reducing ordering: `perm[k]` is the original index at position `k`.
    pub fn permutation(&self) -> &[usize] {
        &self.perm
    }

    /// Lower-triangular factor of the permuted matrix.
    pub fn l(&self) -> &CscMatrix<T> {
        &self.l
    }

    pub fn diag_regularization(&self) -> T {
        self.diag_regularization
    }

    /// Solves `(Pᵀ L Lᵀ P) v = rhs`.
    pub fn solve(&self, rhs: &[T]) -> Result<Vec<T>> {
        let y = self.solve_lower_permuted(rhs)?;
        self.solve_upper_permuted(&y)
    }

    /// `L⁻¹ P rhs`
    pub fn solve_lower_permuted(&self, rhs: &[T]) -> Result<Vec<T>> {
        check_len("factor solve", self.dim(), rhs.len())?;
        let mut y: Vec<T> = self.perm.iter().map(|&p| rhs[p]).collect();
        let (cp, ri, lv) = (self.l.col_ptr(), self.l.row_idx(), self.l.values());
        for j in 0..self.dim() {
            let yj = y[j] / lv[cp[j]];
            y[j] = yj;
            for p in cp[j] + 1..cp[j + 1] {
                y[ri[p]] -= lv[p] * yj;
            }
        }
        Ok(y)
    }

    /// `Pᵀ L⁻ᵀ y`
    pub fn solve_upper_permuted(&self, y: &[T]) -> Result<Vec<T>> {
        check_len("factor solve", self.dim(), y.len())?;
        let mut z = y.to_vec();
        let (cp, ri, lv) = (self.l.col_ptr(), self.l.row_idx(), self.l.values());
        for j in (0..self.dim()).rev() {
            let mut acc = z[j];
            for p in cp[j] + 1..cp[j + 1] {
                acc -= lv[p] * z[ri[p]];
            }
            z[j] = acc / lv[cp[j]];
        }
        let mut out = vec![T::zero(); self.dim()];
        for (k, &p) in self.perm.iter().enumerate() {
            out[p] = z[k];
        }
        Ok(out)
    }

    /// `(Pᵀ L Lᵀ P − σI) v`, which equals `M v` for the factored matrix.
    pub fn reconstruct_apply(&self, v: &[T]) -> Result<Vec<T>> {
        check_len("factor product", self.dim(), v.len())?;
        let pv: Vec<T> = self.perm.iter().map(|&p| v[p]).collect();
        let (cp, ri, lv) = (self.l.col_ptr(), self.l.row_idx(), self.l.values());
        let mut t = vec![T::zero(); self.dim()];
        for j in 0..self.dim() {
            let mut acc = T::zero();
            for p in cp[j]..cp[j + 1] {
                acc += lv[p] * pv[ri[p]];
            }
            t[j] = acc;
        }
        let mut lt = vec![T::zero(); self.dim()];
        for j in 0..self.dim() {
            for p in cp[j]..cp[j + 1] {
                lt[ri[p]] += lv[p] * t[j];
            }
        }
        let mut out = vec![T::zero(); self.dim()];
        for (k, &p) in self.perm.iter().enumerate() {
            out[p] = lt[k] - self.diag_regularization * v[p];
        }
        Ok(out)
    }
}

/// Factorizes a symmetric matrix, escalating regularization when pivots
/// drop below `min_pivot`.
pub fn cholesky_factorize<T: Scalar>(m: &CscMatrix<T>, min_pivot: T) -> Result<CholeskyFactor<T>> {
    CholeskyFactor::factorize(m, min_pivot)
}

/// Solves with a factor produced by [`cholesky_factorize`].
pub fn factor_solve<T: Scalar>(f: &CholeskyFactor<T>, rhs: &[T]) -> Result<Vec<T>> {
    f.solve(rhs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn dense(n: usize, data: &[f64]) -> CscMatrix<f64> {
        CscMatrix::<f64>::from_dense(n, n, data).unwrap()
    }

    /// max |(P M Pᵀ + σI − L Lᵀ)_ij| computed densely
    fn reconstruction_error(m: &CscMatrix<f64>, f: &CholeskyFactor<f64>) -> f64 {
        let n = m.nrows();
        let l = f.l().to_dense();
        let p = f.permutation();
        let mut err: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                let llt: f64 = (0..n).map(|k| l[i * n + k] * l[j * n + k]).sum();
                let mut target = m.get(p[i], p[j]);
                if i == j {
                    target += f.diag_regularization();
                }
                err = err.max((llt - target).abs());
            }
        }
        err
    }

    #[test]
    fn reconstruct_apply_matches_matrix() {
        let m = dense(3, &[4.0, 1.0, 0.0, 1.0, 3.0, 1.0, 0.0, 1.0, 5.0]);
        let f = CholeskyFactor::factorize(&m, 1e-14).unwrap();
        let v = [1.0, -2.0, 0.5];
        let got = f.reconstruct_apply(&v).unwrap();
        let want = m.mul_vec(&v);
        for (a, b) in got.iter().zip(&want) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn identity_factor() {
        let m = CscMatrix::<f64>::identity(3);
        let f = cholesky_factorize(&m, 0.0).unwrap();
        assert_eq!(f.diag_regularization(), 0.0);
        assert_eq!(f.l().to_dense(), CscMatrix::<f64>::identity(3).to_dense());
        assert_eq!(factor_solve(&f, &[1.0, 2.0, 3.0]).unwrap(), vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn two_by_two_hand_factor() {
        let m = dense(2, &[4.0, 2.0, 2.0, 3.0]);
        let sym = SymbolicCholesky::analyze_with_ordering(&m, vec![0, 1]).unwrap();
        let f = sym.factorize(&m, 0.0).unwrap();
        let l = f.l().to_dense();
        assert_eq!(l[0], 2.0);
        assert_eq!(l[1], 0.0);
        assert_eq!(l[2], 1.0);
        assert!((l[3] - 2f64.sqrt()).abs() < 1e-15);
        let v = factor_solve(&f, &[6.0, 5.0]).unwrap();
        assert!((v[0] - 1.0).abs() < 1e-14 && (v[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn singular_matrix_gets_regularized() {
        let m = dense(2, &[1.0, 1.0, 1.0, 1.0]);
        let f = cholesky_factorize(&m, 1e-14).unwrap();
        assert!(f.diag_regularization() > 0.0);
        assert!(reconstruction_error(&m, &f) < 1e-12);
        let v = factor_solve(&f, &[1.0, 1.0]).unwrap();
        assert!(v.iter().all(|x| x.is_finite()));
    }

    #[test]
    fn exhausted_regularization_fails() {
        // negative definite: no decade shift up to 1e-3·max|M_ii| rescues it
        let m = dense(2, &[-1.0, 0.0, 0.0, -1.0]);
        assert!(matches!(
            cholesky_factorize(&m, 0.0),
            Err(Error::FactorizationFailed { .. })
        ));
    }

    #[test]
    fn zero_rhs_and_dimension_errors() {
        let f = cholesky_factorize(&dense(1, &[2.0]), 0.0).unwrap();
        assert_eq!(factor_solve(&f, &[0.0]).unwrap(), vec![0.0]);
        assert!(factor_solve(&f, &[0.0, 1.0]).is_err());
    }

    #[test]
    fn random_sparse_spd_reconstructs() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for trial in 0..20 {
            let n = 5 + trial;
            let mut t = Vec::new();
            for i in 0..n {
                t.push((i, i, n as f64));
                for j in 0..i {
                    if rng.gen::<f64>() < 0.3 {
                        let v = rng.gen_range(-1.0..1.0);
                        t.push((i, j, v));
                        t.push((j, i, v));
                    }
                }
            }
            let m = CscMatrix::<f64>::from_triplets(n, n, &t).unwrap();
            let f = cholesky_factorize(&m, 0.0).unwrap();
            assert_eq!(f.diag_regularization(), 0.0);
            assert!(reconstruction_error(&m, &f) < 1e-12 * n as f64);
            let l = f.l();
            for j in 0..n {
                assert!(l.col(j).1[0] > 0.0);
                assert_eq!(l.col(j).0[0], j);
            }
            let x: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
            let b = m.mul_vec(&x);
            let v = f.solve(&b).unwrap();
            for (a, b) in v.iter().zip(&x) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn symbolic_reuse_rejects_other_patterns() {
        let m = dense(2, &[4.0, 2.0, 2.0, 3.0]);
        let sym = SymbolicCholesky::analyze(&m).unwrap();
        let other = CscMatrix::<f64>::identity(2);
        assert!(sym.factorize(&other, 0.0).is_err());
        let scaled = m.map_values(|v| 2.0 * v);
        assert!(sym.factorize(&scaled, 0.0).is_ok());
    }

    #[test]
    fn single_precision_factor() {
        let m = CscMatrix::<f32>::from_dense(2, 2, &[4.0, 2.0, 2.0, 3.0]).unwrap();
        let f = cholesky_factorize(&m, 0.0).unwrap();
        let v = f.solve(&[6.0, 5.0]).unwrap();
        assert!((v[0] - 1.0).abs() < 1e-5 && (v[1] - 1.0).abs() < 1e-5);
    }
}
