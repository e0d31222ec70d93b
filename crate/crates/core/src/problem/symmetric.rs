use super::model::Sense;
use super::standard::StandardLp;
use crate::error::{check_len, Result};
use crate::linalg::CscMatrix;
use crate::Scalar;

/// Symmetric form.
///
/// `Minimize`: `min cᵀx  s.t.  Ax ≥ b, x ≥ 0`.
/// `Maximize`: `max cᵀx  s.t.  Ax ≤ b, x ≥ 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct SymmetricLp<T> {
    pub a: CscMatrix<T>,
    pub b: Vec<T>,
    pub c: Vec<T>,
    pub sense: Sense,
}

impl<T: Scalar> SymmetricLp<T> {
    pub fn new(a: CscMatrix<T>, b: Vec<T>, c: Vec<T>, sense: Sense) -> Result<Self> {
        check_len("symmetric rhs", a.nrows(), b.len())?;
        check_len("symmetric objective", a.ncols(), c.len())?;
        Ok(Self { a, b, c, sense })
    }

    /// Same problem in `Minimize` shape: a maximization becomes
    /// `min (−c)ᵀx  s.t.  (−A)x ≥ −b`.
    pub fn to_minimization(&self) -> Self {
        match self.sense {
            Sense::Minimize => self.clone(),
            Sense::Maximize => Self {
                a: self.a.map_values(|v| -v),
                b: self.b.iter().map(|&v| -v).collect(),
                c: self.c.iter().map(|&v| -v).collect(),
                sense: Sense::Minimize,
            },
        }
    }

    /// Standard equality form with surplus/slack columns appended. The
    /// objective is negated for `Maximize`; the first `ncols` entries of a
    /// standard solution are the symmetric variables.
    pub fn to_standard(&self) -> Result<StandardLp<T>> {
        let (m, n) = (self.a.nrows(), self.a.ncols());
        let slack_sign = match self.sense {
            Sense::Minimize => -T::one(),
            Sense::Maximize => T::one(),
        };
        let mut trip = Vec::with_capacity(self.a.nnz() + m);
        for j in 0..n {
            let (rows, vals) = self.a.col(j);
            trip.extend(rows.iter().zip(vals).map(|(&i, &v)| (i, j, v)));
        }
        trip.extend((0..m).map(|i| (i, n + i, slack_sign)));
        let a = CscMatrix::from_triplets(m, n + m, &trip)?;
        let sign = self.sense.sign::<T>();
        let mut c: Vec<T> = self.c.iter().map(|&v| sign * v).collect();
        c.resize(n + m, T::zero());
        let mut sp = StandardLp::new(a, self.b.clone(), c)?;
        sp.recovery.vars.truncate(n);
        sp.recovery.sense = self.sense;
        Ok(sp)
    }

    /// Symmetric form of `min cᵀx, Ax = b, 0 ≤ x ≤ u` as
    /// `Ax ≥ b, −Ax ≥ −b, −x_B ≥ −u_B`.
    pub fn from_standard(p: &StandardLp<T>) -> Result<Self> {
        let (m, n) = (p.nrows(), p.ncols());
        let bounded: Vec<usize> = (0..n).filter(|&j| p.is_bounded(j)).collect();
        let mut trip = Vec::with_capacity(2 * p.a.nnz() + bounded.len());
        for j in 0..n {
            let (rows, vals) = p.a.col(j);
            for (&i, &v) in rows.iter().zip(vals) {
                trip.push((i, j, v));
                trip.push((m + i, j, -v));
            }
        }
        let mut b = p.b.clone();
        b.extend(p.b.iter().map(|&v| -v));
        for (k, &j) in bounded.iter().enumerate() {
            trip.push((2 * m + k, j, -T::one()));
            b.push(-p.u[j]);
        }
        let a = CscMatrix::from_triplets(2 * m + bounded.len(), n, &trip)?;
        Self::new(a, b, p.c.clone(), Sense::Minimize)
    }
}

/// Dual in the same symmetric shape: `min/max` swap, `A ↦ Aᵀ`, `b ↔ c`.
pub fn dualize<T: Scalar>(p: &SymmetricLp<T>) -> SymmetricLp<T> {
    SymmetricLp {
        a: p.a.transpose(),
        b: p.c.clone(),
        c: p.b.clone(),
        sense: p.sense.flipped(),
    }
}

/// Standard-form problem whose solution encodes the dual of `p`, with the
/// data needed to map back.
#[derive(Clone, Debug)]
pub struct DualizedLp<T> {
    /// `min −b̄ᵀy  s.t.  Āᵀy + t = c, (y, t) ≥ 0` for the symmetric data (Ā, b̄).
    pub lp: StandardLp<T>,
    pub primal_cols: usize,
}

impl<T: Scalar> DualizedLp<T> {
    pub fn new(p: &StandardLp<T>) -> Result<Self> {
        let sym = SymmetricLp::from_standard(p)?;
        let lp = dualize(&sym).to_standard()?;
        Ok(Self {
            lp,
            primal_cols: p.ncols(),
        })
    }

    /// Primal point of the original problem from the equality multipliers
    /// of the dualized standard form.
    pub fn primal_from_multipliers(&self, y: &[T]) -> Vec<T> {
        y.iter().map(|&v| -v).collect()
    }

    /// Original minimization objective from the dualized objective value.
    pub fn primal_objective(&self, dual_standard_value: T) -> T {
        -dual_standard_value
    }
}
