use crate::error::{Error, Result};
use crate::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sense {
    Minimize,
    Maximize,
}

impl Sense {
    /// +1 for minimization, −1 for maximization.
    pub fn sign<T: Scalar>(self) -> T {
        match self {
            Sense::Minimize => T::one(),
            Sense::Maximize => -T::one(),
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            Sense::Minimize => Sense::Maximize,
            Sense::Maximize => Sense::Minimize,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RowKind {
    Equal,
    LessEqual,
    GreaterEqual,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Row {
    pub name: String,
    pub kind: RowKind,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Column<T> {
    pub name: String,
    pub lower: T,
    pub upper: T,
}

/// A linear program as read from a model file.
#[derive(Clone, Debug, PartialEq)]
pub struct LpProblem<T> {
    pub name: String,
    pub sense: Sense,
    pub objective_name: String,
    pub rows: Vec<Row>,
    pub columns: Vec<Column<T>>,
    /// Objective coefficient per column.
    pub objective: Vec<T>,
    /// `(row, column, value)` with duplicates already summed.
    pub coefficients: Vec<(usize, usize, T)>,
    pub rhs: Vec<T>,
    pub ranges: Vec<Option<T>>,
    pub objective_constant: T,
}

impl<T: Scalar> LpProblem<T> {
    pub fn new(name: impl Into<String>, sense: Sense) -> Self {
        Self {
            name: name.into(),
            sense,
            objective_name: "OBJ".to_string(),
            rows: Vec::new(),
            columns: Vec::new(),
            objective: Vec::new(),
            coefficients: Vec::new(),
            rhs: Vec::new(),
            ranges: Vec::new(),
            objective_constant: T::zero(),
        }
    }

    pub fn add_row(&mut self, name: impl Into<String>, kind: RowKind, rhs: T) -> usize {
        self.rows.push(Row {
            name: name.into(),
            kind,
        });
        self.rhs.push(rhs);
        self.ranges.push(None);
        self.rows.len() - 1
    }

    /// Adds a column with default bounds `[0, +∞)`.
    pub fn add_column(&mut self, name: impl Into<String>, cost: T) -> usize {
        self.columns.push(Column {
            name: name.into(),
            lower: T::zero(),
            upper: T::infinity(),
        });
        self.objective.push(cost);
        self.columns.len() - 1
    }

    pub fn set_coefficient(&mut self, row: usize, col: usize, value: T) {
        self.coefficients.push((row, col, value));
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn num_columns(&self) -> usize {
        self.columns.len()
    }

    pub fn validate(&self) -> Result<()> {
        let (m, n) = (self.rows.len(), self.columns.len());
        if self.rhs.len() != m || self.ranges.len() != m || self.objective.len() != n {
            return Err(Error::Model("row or column data length mismatch".into()));
        }
        for &(i, j, _) in &self.coefficients {
            if i >= m || j >= n {
                return Err(Error::Model(format!("coefficient ({i}, {j}) references an undeclared row or column")));
            }
        }
        for col in &self.columns {
            if col.lower.is_nan() || col.upper.is_nan() || col.lower > col.upper {
                return Err(Error::Model(format!(
                    "column {} has infeasible bounds [{}, {}]",
                    col.name, col.lower, col.upper
                )));
            }
        }
        Ok(())
    }

    /// Activity interval `[lo, hi]` of row `i`, with ranges applied.
    pub fn row_bounds(&self, i: usize) -> (T, T) {
        let rhs = self.rhs[i];
        let inf = T::infinity();
        match (self.rows[i].kind, self.ranges[i]) {
            (RowKind::Equal, None) => (rhs, rhs),
            (RowKind::Equal, Some(r)) if r >= T::zero() => (rhs, rhs + r),
            (RowKind::Equal, Some(r)) => (rhs + r, rhs),
            (RowKind::LessEqual, None) => (-inf, rhs),
            (RowKind::LessEqual, Some(r)) => (rhs - r.abs(), rhs),
            (RowKind::GreaterEqual, None) => (rhs, inf),
            (RowKind::GreaterEqual, Some(r)) => (rhs, rhs + r.abs()),
        }
    }

    pub fn row_activities(&self, x: &[T]) -> Vec<T> {
        let mut act = vec![T::zero(); self.rows.len()];
        for &(i, j, v) in &self.coefficients {
            act[i] += v * x[j];
        }
        act
    }

    pub fn objective_value(&self, x: &[T]) -> T {
        self.objective.iter().zip(x).map(|(&c, &xj)| c * xj).sum::<T>() + self.objective_constant
    }

    /// Largest violation of any row interval or variable bound at `x`.
    pub fn max_violation(&self, x: &[T]) -> T {
        let mut worst = T::zero();
        for (i, &a) in self.row_activities(x).iter().enumerate() {
            let (lo, hi) = self.row_bounds(i);
            worst = worst.max(lo - a).max(a - hi);
        }
        for (col, &xj) in self.columns.iter().zip(x) {
            worst = worst.max(col.lower - xj).max(xj - col.upper);
        }
        worst
    }
}
