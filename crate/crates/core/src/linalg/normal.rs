//! Assembly of normal matrices `A diag(d²) Aᵀ + diag(shift)`.

use super::CscMatrix;
use crate::error::{check_len, Error, Result};
use crate::Scalar;

/// Forms `A·diag(d²)·Aᵀ + diag(shift)` with both triangles stored.
///
/// Only the lower triangle is accumulated; the upper triangle is a mirror,
/// so the stored matrix is bitwise symmetric.
pub fn form_normal_matrix<T: Scalar>(
    a: &CscMatrix<T>,
    d: &[T],
    shift: Option<&[T]>,
) -> Result<CscMatrix<T>> {
    check_len("normal matrix scaling", a.ncols(), d.len())?;
    if let Some(index) = d.iter().position(|&v| !(v > T::zero()) || !v.is_finite()) {
        return Err(Error::NonPositiveScaling { index });
    }
    if let Some(shift) = shift {
        check_len("normal matrix shift", a.nrows(), shift.len())?;
        if shift.iter().any(|&v| v < T::zero() || !v.is_finite()) {
            return Err(Error::InvalidParameter("shift must be nonnegative and finite".into()));
        }
    }
    let d2: Vec<T> = d.iter().map(|&v| v * v).collect();
    let lower = assemble_lower(a, &a.transpose(), &d2, shift);
    Ok(mirror_lower(&lower))
}

/// Lower triangle (diagonal included) of `A diag(d2) Aᵀ + diag(shift)`.
fn assemble_lower<T: Scalar>(
    a: &CscMatrix<T>,
    at: &CscMatrix<T>,
    d2: &[T],
    shift: Option<&[T]>,
) -> CscMatrix<T> {
    let m = a.nrows();
    let mut work = vec![T::zero(); m];
    let mut mark = vec![usize::MAX; m];
    let mut pattern: Vec<usize> = Vec::new();

    let mut col_ptr = Vec::with_capacity(m + 1);
    let mut row_idx = Vec::new();
    let mut values = Vec::new();
    col_ptr.push(0);
    for i in 0..m {
        pattern.clear();
        if shift.is_some() {
            mark[i] = i;
            pattern.push(i);
        }
        let (cols_of_row, a_row) = at.col(i);
        for (&j, &aij) in cols_of_row.iter().zip(a_row) {
            let scaled = d2[j] * aij;
            let (rows, vals) = a.col(j);
            // rows are sorted, so skip straight to the lower part
            let start = rows.partition_point(|&k| k < i);
            for (&k, &akj) in rows[start..].iter().zip(&vals[start..]) {
                if mark[k] != i {
                    mark[k] = i;
                    work[k] = T::zero();
                    pattern.push(k);
                }
                work[k] += akj * scaled;
            }
        }
        if let Some(shift) = shift {
            work[i] += shift[i];
        }
        pattern.sort_unstable();
        for &k in &pattern {
            if work[k] != T::zero() {
                row_idx.push(k);
                values.push(work[k]);
            }
        }
        col_ptr.push(row_idx.len());
    }
    CscMatrix::from_parts_unchecked(m, m, col_ptr, row_idx, values)
}

/// Expands a lower-triangular CSC matrix into the full symmetric matrix.
fn mirror_lower<T: Scalar>(lower: &CscMatrix<T>) -> CscMatrix<T> {
    let n = lower.ncols();
    // column i receives: upper entries (row k < i) from lower column k, then lower column i
    let mut counts = vec![0usize; n];
    for j in 0..n {
        let (rows, _) = lower.col(j);
        counts[j] += rows.len();
        for &k in rows {
            if k != j {
                counts[k] += 1;
            }
        }
    }
    let mut col_ptr = vec![0usize; n + 1];
    for j in 0..n {
        col_ptr[j + 1] = col_ptr[j] + counts[j];
    }
    let nnz = col_ptr[n];
    let mut row_idx = vec![0usize; nnz];
    let mut values = vec![T::zero(); nnz];
    let mut next = col_ptr.clone();
    for k in 0..n {
        let (rows, vals) = lower.col(k);
        for (&i, &v) in rows.iter().zip(vals) {
            if i != k {
                // entry (i, k) mirrored to (k, i): column i, row k
                row_idx[next[i]] = k;
                values[next[i]] = v;
                next[i] += 1;
            }
        }
    }
    // Upper parts came in increasing k; the lower column follows.
    for j in 0..n {
        let (rows, vals) = lower.col(j);
        for (&i, &v) in rows.iter().zip(vals) {
            row_idx[next[j]] = i;
            values[next[j]] = v;
            next[j] += 1;
        }
    }
    CscMatrix::from_parts_unchecked(n, n, col_ptr, row_idx, values)
}

/// Applies `v ↦ A diag(d2) Aᵀ v + shift ∘ v` without forming the matrix.
#[derive(Clone, Debug)]
pub struct NormalOperator<'a, T> {
    a: &'a CscMatrix<T>,
    d2: Vec<T>,
    shift: Option<&'a [T]>,
    scratch: Vec<T>,
}

impl<'a, T: Scalar> NormalOperator<'a, T> {
    pub fn new(a: &'a CscMatrix<T>, d: &[T], shift: Option<&'a [T]>) -> Self {
        Self {
            a,
            d2: d.iter().map(|&v| v * v).collect(),
            shift,
            scratch: vec![T::zero(); a.ncols()],
        }
    }

    pub fn dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn apply(&mut self, v: &[T], out: &mut [T]) {
        self.a.tr_mul_vec_into(v, &mut self.scratch);
        for (s, &w) in self.scratch.iter_mut().zip(&self.d2) {
            *s *= w;
        }
        self.a.mul_vec_into(&self.scratch, out);
        if let Some(shift) = self.shift {
            for ((o, &s), &vi) in out.iter_mut().zip(shift).zip(v) {
                *o += s * vi;
            }
        }
    }
}
