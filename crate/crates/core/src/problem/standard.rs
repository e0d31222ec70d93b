use log::warn;

use super::model::{LpProblem, RowKind, Sense};
use crate::error::{check_len, Error, Result};
use crate::linalg::vector::norm_inf;
use crate::linalg::CscMatrix;
use crate::Scalar;

/// How one original variable is rebuilt from the standard-form vector.
#[derive(Clone, Debug, PartialEq)]
pub enum VarRecovery<T> {
    Constant(T),
    /// `shift + Σ sign·x[index]`.
    Affine { shift: T, terms: Vec<(usize, T)> },
}

#[derive(Clone, Debug, PartialEq)]
pub struct RecoveryMap<T> {
    pub vars: Vec<VarRecovery<T>>,
    /// Added to the standard-form objective to get the minimization-form value.
    pub objective_offset: T,
    pub sense: Sense,
    /// Original row index of each standard-form row.
    pub kept_rows: Vec<usize>,
}

impl<T: Scalar> RecoveryMap<T> {
    pub fn identity(n: usize, m: usize) -> Self {
        Self {
            vars: (0..n)
                .map(|j| VarRecovery::Affine {
                    shift: T::zero(),
                    terms: vec![(j, T::one())],
                })
                .collect(),
            objective_offset: T::zero(),
            sense: Sense::Minimize,
            kept_rows: (0..m).collect(),
        }
    }

    pub fn recover(&self, x: &[T]) -> Vec<T> {
        self.vars
            .iter()
            .map(|rule| match rule {
                VarRecovery::Constant(v) => *v,
                VarRecovery::Affine { shift, terms } => {
                    terms.iter().fold(*shift, |acc, &(k, sign)| acc + sign * x[k])
                }
            })
            .collect()
    }

    /// Objective value in the original sense given the standard-form value `cᵀx`.
    pub fn original_objective(&self, standard_value: T) -> T {
        self.sense.sign::<T>() * (standard_value + self.objective_offset)
    }
}

/// `min cᵀx  s.t.  Ax = b, 0 ≤ x ≤ u`.
#[derive(Clone, Debug, PartialEq)]
pub struct StandardLp<T> {
    pub a: CscMatrix<T>,
    pub b: Vec<T>,
    pub c: Vec<T>,
    pub u: Vec<T>,
    pub recovery: RecoveryMap<T>,
}

impl<T: Scalar> StandardLp<T> {
    /// Problem without upper bounds and an identity recovery map.
    pub fn new(a: CscMatrix<T>, b: Vec<T>, c: Vec<T>) -> Result<Self> {
        let u = vec![T::infinity(); a.ncols()];
        Self::with_bounds(a, b, c, u)
    }

    pub fn with_bounds(a: CscMatrix<T>, b: Vec<T>, c: Vec<T>, u: Vec<T>) -> Result<Self> {
        let (m, n) = (a.nrows(), a.ncols());
        check_len("right-hand side", m, b.len())?;
        check_len("objective", n, c.len())?;
        check_len("upper bounds", n, u.len())?;
        if let Some(j) = u.iter().position(|&v| v.is_nan() || v <= T::zero()) {
            return Err(Error::Model(format!("upper bound {j} is not positive")));
        }
        Ok(Self {
            recovery: RecoveryMap::identity(n, m),
            a,
            b,
            c,
            u,
        })
    }

    pub fn nrows(&self) -> usize {
        self.a.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.a.ncols()
    }

    pub fn has_bounds(&self) -> bool {
        self.u.iter().any(|v| v.is_finite())
    }

    pub fn is_bounded(&self, j: usize) -> bool {
        self.u[j].is_finite()
    }

    pub fn objective(&self, x: &[T]) -> T {
        self.c.iter().zip(x).map(|(&c, &x)| c * x).sum()
    }

    /// Objective in the sense and units of the original model.
    pub fn original_objective(&self, x: &[T]) -> T {
        self.recovery.original_objective(self.objective(x))
    }

    pub fn b_scale(&self) -> T {
        T::one() + norm_inf(&self.b)
    }
}

/// Converts a model to `min cᵀx, Ax = b, 0 ≤ x ≤ u`.
///
/// Columns are ordered: kept originals, negative parts of free variables,
/// then row slacks.
pub fn to_standard_form<T: Scalar>(p: &LpProblem<T>) -> Result<StandardLp<T>> {
    p.validate()?;
    let (m, n) = (p.num_rows(), p.num_columns());
    let sign = p.sense.sign::<T>();
    let cmin: Vec<T> = p.objective.iter().map(|&c| sign * c).collect();

    let mut col_entries: Vec<Vec<(usize, T)>> = vec![Vec::new(); n];
    for &(i, j, v) in &p.coefficients {
        if v != T::zero() {
            col_entries[j].push((i, v));
        }
    }

    enum Plan<T> {
        Fixed(T),
        Lower(T),
        Upper(T),
        Free,
    }

    let mut plans = Vec::with_capacity(n);
    for (j, col) in p.columns.iter().enumerate() {
        let (lo, up) = (col.lower, col.upper);
        let plan = if lo == up {
            Plan::Fixed(lo)
        } else if col_entries[j].is_empty() {
            let c = cmin[j];
            let value = if c > T::zero() {
                lo
            } else if c < T::zero() {
                up
            } else if lo.is_finite() {
                lo
            } else if up.is_finite() {
                up
            } else {
                T::zero()
            };
            if !value.is_finite() {
                return Err(Error::Model(format!("column {} is empty and unbounded in the objective direction", col.name)));
            }
            Plan::Fixed(value)
        } else if lo.is_finite() {
            Plan::Lower(lo)
        } else if up.is_finite() {
            Plan::Upper(up)
        } else {
            Plan::Free
        };
        plans.push(plan);
    }

    // row constants from eliminated or shifted variables
    let mut row_const = vec![T::zero(); m];
    let mut offset = sign * p.objective_constant;
    let mut row_live = vec![false; m];
    for (j, plan) in plans.iter().enumerate() {
        let shift = match plan {
            Plan::Fixed(v) | Plan::Lower(v) | Plan::Upper(v) => *v,
            Plan::Free => T::zero(),
        };
        offset += cmin[j] * shift;
        for &(i, v) in &col_entries[j] {
            row_const[i] += v * shift;
            if !matches!(plan, Plan::Fixed(_)) {
                row_live[i] = true;
            }
        }
    }

    let mut kept_rows = Vec::new();
    let tol = T::lit(1e-9);
    for i in 0..m {
        if row_live[i] {
            kept_rows.push(i);
            continue;
        }
        let (lo, hi) = p.row_bounds(i);
        let act = row_const[i];
        let slack = tol * (T::one() + act.abs());
        if act < lo - slack || act > hi + slack {
            return Err(Error::Model(format!("row {} has no free variables and is infeasible", p.rows[i].name)));
        }
        warn!("dropping empty row {}", p.rows[i].name);
    }
    let mut new_row = vec![usize::MAX; m];
    for (k, &i) in kept_rows.iter().enumerate() {
        new_row[i] = k;
    }

    let mut triplets = Vec::new();
    let mut c = Vec::new();
    let mut u = Vec::new();
    let mut vars = Vec::with_capacity(n);
    let mut free_cols = Vec::new();
    for (j, plan) in plans.iter().enumerate() {
        let col = &p.columns[j];
        let k = c.len();
        let (rule, col_sign) = match *plan {
            Plan::Fixed(v) => {
                vars.push(VarRecovery::Constant(v));
                continue;
            }
            Plan::Lower(lo) => {
                u.push(col.upper - lo);
                (VarRecovery::Affine { shift: lo, terms: vec![(k, T::one())] }, T::one())
            }
            Plan::Upper(up) => {
                u.push(T::infinity());
                (VarRecovery::Affine { shift: up, terms: vec![(k, -T::one())] }, -T::one())
            }
            Plan::Free => {
                u.push(T::infinity());
                free_cols.push((j, k));
                (VarRecovery::Affine { shift: T::zero(), terms: vec![(k, T::one())] }, T::one())
            }
        };
        c.push(col_sign * cmin[j]);
        for &(i, v) in &col_entries[j] {
            triplets.push((new_row[i], k, col_sign * v));
        }
        vars.push(rule);
    }
    for &(j, kpos) in &free_cols {
        let k = c.len();
        c.push(-cmin[j]);
        u.push(T::infinity());
        for &(i, v) in &col_entries[j] {
            triplets.push((new_row[i], k, -v));
        }
        if let VarRecovery::Affine { terms, .. } = &mut vars[j] {
            debug_assert_eq!(terms[0].0, kpos);
            terms.push((k, -T::one()));
        }
    }

    let mut b = Vec::with_capacity(kept_rows.len());
    for (r, &i) in kept_rows.iter().enumerate() {
        let (lo, hi) = p.row_bounds(i);
        let cst = row_const[i];
        if lo == hi {
            b.push(lo - cst);
            continue;
        }
        let k = c.len();
        c.push(T::zero());
        if hi == T::infinity() {
            triplets.push((r, k, -T::one()));
            u.push(T::infinity());
            b.push(lo - cst);
        } else if lo == T::neg_infinity() {
            triplets.push((r, k, T::one()));
            u.push(T::infinity());
            b.push(hi - cst);
        } else {
            triplets.push((r, k, -T::one()));
            u.push(hi - lo);
            b.push(lo - cst);
        }
    }

    let (mr, nc) = (kept_rows.len(), c.len());
    if mr > nc {
        return Err(Error::Model(format!("{mr} constraints but only {nc} variables after conversion")));
    }
    let a = CscMatrix::from_triplets(mr, nc, &triplets)?;
    Ok(StandardLp {
        a,
        b,
        c,
        u,
        recovery: RecoveryMap {
            vars,
            objective_offset: offset,
            sense: p.sense,
            kept_rows,
        },
    })
}

/// Row-kind-preserving helper used by tests and the generator.
pub fn standard_to_problem<T: Scalar>(sp: &StandardLp<T>) -> LpProblem<T> {
    let mut lp = LpProblem::new("STD", Sense::Minimize);
    for (i, &bi) in sp.b.iter().enumerate() {
        lp.add_row(format!("R{}", i + 1), RowKind::Equal, bi);
    }
    for (j, &cj) in sp.c.iter().enumerate() {
        let k = lp.add_column(format!("X{}", j + 1), cj);
        lp.columns[k].upper = sp.u[j];
    }
    for j in 0..sp.ncols() {
        let (rows, vals) = sp.a.col(j);
        for (&i, &v) in rows.iter().zip(vals) {
            lp.set_coefficient(i, j, v);
        }
    }
    lp
}
