use crate::error::{check_len, Error, Result};
use crate::Scalar;

/// Compressed sparse column matrix.
///
/// Row indices inside a column are strictly increasing and no explicit zeros
/// are stored.
#[derive(Clone, Debug, PartialEq)]
pub struct CscMatrix<T> {
    nrows: usize,
    ncols: usize,
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    values: Vec<T>,
}

impl<T: Scalar> CscMatrix<T> {
    /// Builds a matrix from raw CSC arrays, validating every storage invariant.
    pub fn new(
        nrows: usize,
        ncols: usize,
        col_ptr: Vec<usize>,
        row_idx: Vec<usize>,
        values: Vec<T>,
    ) -> Result<Self> {
        check_len("csc col_ptr", ncols + 1, col_ptr.len())?;
        check_len("csc values", row_idx.len(), values.len())?;
        if col_ptr[0] != 0 || col_ptr[ncols] != row_idx.len() {
            return Err(Error::InvalidParameter(
                "col_ptr must start at 0 and end at nnz".into(),
            ));
        }
        for j in 0..ncols {
            if col_ptr[j] > col_ptr[j + 1] {
                return Err(Error::InvalidParameter("col_ptr must be nondecreasing".into()));
            }
            let rows = &row_idx[col_ptr[j]..col_ptr[j + 1]];
            if rows.iter().any(|&r| r >= nrows) {
                return Err(Error::InvalidParameter(format!("row index out of range in column {j}")));
            }
            if rows.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::InvalidParameter(format!(
                    "row indices not strictly increasing in column {j}"
                )));
            }
        }
        if values.iter().any(|v| *v == T::zero()) {
            return Err(Error::InvalidParameter("explicit zero stored".into()));
        }
        Ok(Self {
            nrows,
            ncols,
            col_ptr,
            row_idx,
            values,
        })
    }

    pub(crate) fn from_parts_unchecked(
        nrows: usize,
        ncols: usize,
        col_ptr: Vec<usize>,
        row_idx: Vec<usize>,
        values: Vec<T>,
    ) -> Self {
        debug_assert_eq!(col_ptr.len(), ncols + 1);
        debug_assert_eq!(row_idx.len(), values.len());
        Self {
            nrows,
            ncols,
            col_ptr,
            row_idx,
            values,
        }
    }

    /// Assembles from `(row, col, value)` triplets. Duplicates are summed and
    /// entries that end up exactly zero are dropped.
    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, T)]) -> Result<Self> {
        let mut counts = vec![0usize; ncols];
        for &(i, j, _) in triplets {
            if i >= nrows || j >= ncols {
                return Err(Error::InvalidParameter(format!(
                    "triplet ({i}, {j}) outside {nrows}x{ncols}"
                )));
            }
            counts[j] += 1;
        }
        let mut start = vec![0usize; ncols + 1];
        for j in 0..ncols {
            start[j + 1] = start[j] + counts[j];
        }
        let mut next = start.clone();
        let mut rows = vec![0usize; triplets.len()];
        let mut vals = vec![T::zero(); triplets.len()];
        for &(i, j, v) in triplets {
            rows[next[j]] = i;
            vals[next[j]] = v;
            next[j] += 1;
        }

        let mut col_ptr = Vec::with_capacity(ncols + 1);
        let mut row_idx = Vec::with_capacity(triplets.len());
        let mut values = Vec::with_capacity(triplets.len());
        col_ptr.push(0);
        let mut order: Vec<usize> = Vec::new();
        for j in 0..ncols {
            order.clear();
            order.extend(start[j]..start[j + 1]);
            // Stable sort keeps the summation order of duplicates deterministic.
            order.sort_by_key(|&p| rows[p]);
            let mut k = 0;
            while k < order.len() {
                let r = rows[order[k]];
                let mut acc = T::zero();
                while k < order.len() && rows[order[k]] == r {
                    acc += vals[order[k]];
                    k += 1;
                }
                if acc != T::zero() {
                    row_idx.push(r);
                    values.push(acc);
                }
            }
            col_ptr.push(row_idx.len());
        }
        Ok(Self::from_parts_unchecked(nrows, ncols, col_ptr, row_idx, values))
    }

    /// Builds from a row-major dense slice of length `nrows * ncols`.
    pub fn from_dense(nrows: usize, ncols: usize, data: &[T]) -> Result<Self> {
        check_len("dense data", nrows * ncols, data.len())?;
        let mut triplets = Vec::new();
        for i in 0..nrows {
            for j in 0..ncols {
                let v = data[i * ncols + j];
                if v != T::zero() {
                    triplets.push((i, j, v));
                }
            }
        }
        Self::from_triplets(nrows, ncols, &triplets)
    }

    pub fn identity(n: usize) -> Self {
        Self::from_parts_unchecked(n, n, (0..=n).collect(), (0..n).collect(), vec![T::one(); n])
    }

    pub fn from_diagonal(diag: &[T]) -> Self {
        let triplets: Vec<_> = diag.iter().enumerate().map(|(i, &v)| (i, i, v)).collect();
        Self::from_triplets(diag.len(), diag.len(), &triplets).expect("diagonal triplets are in range")
    }

    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self::from_parts_unchecked(nrows, ncols, vec![0; ncols + 1], Vec::new(), Vec::new())
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn col_ptr(&self) -> &[usize] {
        &self.col_ptr
    }

    pub fn row_idx(&self) -> &[usize] {
        &self.row_idx
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    /// Row indices and values of column `j`.
    pub fn col(&self, j: usize) -> (&[usize], &[T]) {
        let range = self.col_ptr[j]..self.col_ptr[j + 1];
        (&self.row_idx[range.clone()], &self.values[range])
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        let (rows, vals) = self.col(j);
        match rows.binary_search(&i) {
            Ok(p) => vals[p],
            Err(_) => T::zero(),
        }
    }

    /// `y = A x`
    pub fn mul_vec_into(&self, x: &[T], y: &mut [T]) {
        debug_assert_eq!(x.len(), self.ncols);
        debug_assert_eq!(y.len(), self.nrows);
        y.iter_mut().for_each(|v| *v = T::zero());
        for (j, &xj) in x.iter().enumerate() {
            if xj == T::zero() {
                continue;
            }
            for p in self.col_ptr[j]..self.col_ptr[j + 1] {
                y[self.row_idx[p]] += self.values[p] * xj;
            }
        }
    }

    pub fn mul_vec(&self, x: &[T]) -> Vec<T> {
        let mut y = vec![T::zero(); self.nrows];
        self.mul_vec_into(x, &mut y);
        y
    }

    /// `x = Aᵀ y`
    pub fn tr_mul_vec_into(&self, y: &[T], x: &mut [T]) {
        debug_assert_eq!(y.len(), self.nrows);
        debug_assert_eq!(x.len(), self.ncols);
        for (j, xj) in x.iter_mut().enumerate() {
            let mut acc = T::zero();
            for p in self.col_ptr[j]..self.col_ptr[j + 1] {
                acc += self.values[p] * y[self.row_idx[p]];
            }
            *xj = acc;
        }
    }

    pub fn tr_mul_vec(&self, y: &[T]) -> Vec<T> {
        let mut x = vec![T::zero(); self.ncols];
        self.tr_mul_vec_into(y, &mut x);
        x
    }

    pub fn transpose(&self) -> Self {
        let mut counts = vec![0usize; self.nrows + 1];
        for &i in &self.row_idx {
            counts[i + 1] += 1;
        }
        for i in 0..self.nrows {
            counts[i + 1] += counts[i];
        }
        let col_ptr = counts.clone();
        let mut next = counts;
        let mut row_idx = vec![0usize; self.nnz()];
        let mut values = vec![T::zero(); self.nnz()];
        for j in 0..self.ncols {
            for p in self.col_ptr[j]..self.col_ptr[j + 1] {
                let i = self.row_idx[p];
                row_idx[next[i]] = j;
                values[next[i]] = self.values[p];
                next[i] += 1;
            }
        }
        Self::from_parts_unchecked(self.ncols, self.nrows, col_ptr, row_idx, values)
    }

    /// Entrywise map; entries mapped to zero are dropped.
    pub fn map_values(&self, f: impl Fn(T) -> T) -> Self {
        let mut col_ptr = Vec::with_capacity(self.ncols + 1);
        let mut row_idx = Vec::with_capacity(self.nnz());
        let mut values = Vec::with_capacity(self.nnz());
        col_ptr.push(0);
        for j in 0..self.ncols {
            for p in self.col_ptr[j]..self.col_ptr[j + 1] {
                let v = f(self.values[p]);
                if v != T::zero() {
                    row_idx.push(self.row_idx[p]);
                    values.push(v);
                }
            }
            col_ptr.push(row_idx.len());
        }
        Self::from_parts_unchecked(self.nrows, self.ncols, col_ptr, row_idx, values)
    }

    /// Row-major dense copy.
    pub fn to_dense(&self) -> Vec<T> {
        let mut out = vec![T::zero(); self.nrows * self.ncols];
        for j in 0..self.ncols {
            for p in self.col_ptr[j]..self.col_ptr[j + 1] {
                out[self.row_idx[p] * self.ncols + j] = self.values[p];
            }
        }
        out
    }

    pub fn diagonal(&self) -> Vec<T> {
        (0..self.nrows.min(self.ncols)).map(|i| self.get(i, i)).collect()
    }

    pub fn max_abs_diag(&self) -> T {
        self.diagonal().into_iter().fold(T::zero(), |m, v| m.max(v.abs()))
    }

    pub fn same_pattern(&self, other: &Self) -> bool {
        self.nrows == other.nrows
            && self.ncols == other.ncols
            && self.col_ptr == other.col_ptr
            && self.row_idx == other.row_idx
    }

    /// Keeps only the columns listed in `cols`, in that order.
    pub fn select_columns(&self, cols: &[usize]) -> Self {
        let mut col_ptr = Vec::with_capacity(cols.len() + 1);
        let mut row_idx = Vec::new();
        let mut values = Vec::new();
        col_ptr.push(0);
        for &j in cols {
            let (r, v) = self.col(j);
            row_idx.extend_from_slice(r);
            values.extend_from_slice(v);
            col_ptr.push(row_idx.len());
        }
        Self::from_parts_unchecked(self.nrows, cols.len(), col_ptr, row_idx, values)
    }

    /// Frobenius norm, an upper bound on the spectral norm.
    pub fn frobenius_norm(&self) -> T {
        super::vector::norm2(&self.values)
    }

    /// Spectral norm estimate by power iteration on `AᵀA`.
    pub fn spectral_norm_estimate(&self, iters: usize) -> T {
        if self.nnz() == 0 {
            return T::zero();
        }
        let mut v = vec![T::one(); self.ncols];
        let mut sigma = T::zero();
        for _ in 0..iters.max(1) {
            let av = self.mul_vec(&v);
            let w = self.tr_mul_vec(&av);
            let nw = super::vector::norm2(&w);
            if nw == T::zero() {
                break;
            }
            let nv = super::vector::norm2(&v);
            sigma = (nw / nv).sqrt();
            v = w.iter().map(|&x| x / nw).collect();
        }
        sigma
    }
}
