//! Normal-equation solver handles shared by the engines.

use std::time::{Duration, Instant};

use crate::error::{Error, Result};
use crate::linalg::{form_normal_matrix, pcg_solve, CholeskyFactor, CscMatrix, NormalOperator, SymbolicCholesky};
use crate::linalg::vector::norm2;
use crate::Scalar;

/// Pivots below this multiple of the largest diagonal entry trigger regularization.
pub const RELATIVE_MIN_PIVOT: f64 = 1e-30;

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SolverStats {
    pub factorizations: usize,
    pub solves: usize,
    pub cg_iterations: usize,
    /// Forming plus factorizing the normal matrix.
    pub factor_time: Duration,
    pub solve_time: Duration,
    pub last_factor_time: Duration,
    pub last_solve_time: Duration,
}

/// Solves `A diag(d²) Aᵀ q = rhs`.
pub trait NormalSolver<T: Scalar> {
    fn solve_normal(&mut self, a: &CscMatrix<T>, d: &[T], rhs: &[T]) -> Result<Vec<T>>;

    /// True when solutions are accurate to factorization roundoff.
    fn is_exact(&self) -> bool;

    fn stats(&self) -> &SolverStats;
}

/// Forms and factorizes the normal matrix; reuses the factor while `d` is unchanged.
#[derive(Clone, Debug)]
pub struct DirectSolver<T> {
    symbolic: Option<SymbolicCholesky>,
    cached: Option<(Vec<T>, CholeskyFactor<T>)>,
    stats: SolverStats,
}

impl<T: Scalar> Default for DirectSolver<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Scalar> DirectSolver<T> {
    pub fn new() -> Self {
        Self {
            symbolic: None,
            cached: None,
            stats: SolverStats::default(),
        }
    }

    /// Factor of `A diag(d²) Aᵀ`, computed if `d` differs from the cached one.
    pub fn factor(&mut self, a: &CscMatrix<T>, d: &[T]) -> Result<&CholeskyFactor<T>> {
        let fresh = match &self.cached {
            Some((dc, _)) => dc.as_slice() != d,
            None => true,
        };
        if fresh {
            let start = Instant::now();
            let m = form_normal_matrix(a, d, None)?;
            let reuse = matches!(&self.symbolic, Some(s) if s.matches_pattern(&m));
            if !reuse {
                self.symbolic = Some(SymbolicCholesky::analyze(&m)?);
            }
            let symbolic = self.symbolic.as_ref().expect("analyzed above");
            let min_pivot = T::lit(RELATIVE_MIN_PIVOT) * m.max_abs_diag();
            let f = symbolic.factorize(&m, min_pivot)?;
            let elapsed = start.elapsed();
            self.stats.factorizations += 1;
            self.stats.factor_time += elapsed;
            self.stats.last_factor_time = elapsed;
            self.cached = Some((d.to_vec(), f));
        }
        Ok(&self.cached.as_ref().expect("cached above").1)
    }

    /// Takes ownership of the last factor, if any.
    pub fn take_factor(&mut self) -> Option<(Vec<T>, CholeskyFactor<T>)> {
        self.cached.take()
    }
}

impl<T: Scalar> NormalSolver<T> for DirectSolver<T> {
    fn solve_normal(&mut self, a: &CscMatrix<T>, d: &[T], rhs: &[T]) -> Result<Vec<T>> {
        self.factor(a, d)?;
        let start = Instant::now();
        let factor = &self.cached.as_ref().expect("factorized above").1;
        let q = refined_solve(factor, a, d, rhs, REFINEMENT_STEPS)?;
        let elapsed = start.elapsed();
        self.stats.solves += 1;
        self.stats.solve_time += elapsed;
        self.stats.last_solve_time = elapsed;
        Ok(q)
    }

    fn is_exact(&self) -> bool {
        true
    }

    fn stats(&self) -> &SolverStats {
        &self.stats
    }
}

/// Iterative refinement steps applied to direct normal-equation solves.
pub const REFINEMENT_STEPS: usize = 3;

/// Solves `A diag(d²) Aᵀ q = rhs` with `factor`, then refines against the
/// matrix-free operator while the residual keeps shrinking.
pub fn refined_solve<T: Scalar>(
    factor: &CholeskyFactor<T>,
    a: &CscMatrix<T>,
    d: &[T],
    rhs: &[T],
    max_steps: usize,
) -> Result<Vec<T>> {
    let q = factor.solve(rhs)?;
    refine(factor, a, d, rhs, q, max_steps)
}

/// Refinement from an initial solution `q`.
pub fn refine<T: Scalar>(
    factor: &CholeskyFactor<T>,
    a: &CscMatrix<T>,
    d: &[T],
    rhs: &[T],
    mut q: Vec<T>,
    max_steps: usize,
) -> Result<Vec<T>> {
    if max_steps == 0 {
        return Ok(q);
    }
    let mut op = NormalOperator::new(a, d, None);
    let mut mq = vec![T::zero(); rhs.len()];
    let floor = T::epsilon() * norm2(rhs);
    let mut last = T::infinity();
    for _ in 0..max_steps {
        op.apply(&q, &mut mq);
        let r: Vec<T> = rhs.iter().zip(&mq).map(|(&b, &v)| b - v).collect();
        let rn = norm2(&r);
        if !(rn > floor) || !(rn < last) {
            break;
        }
        last = rn;
        let dq = factor.solve(&r)?;
        for (qi, di) in q.iter_mut().zip(dq) {
            *qi += di;
        }
    }
    Ok(q)
}

/// True when a residual is as small as a backward-stable solve could make it:
/// `‖r‖ ≤ 1e3·ε·(‖M‖‖q‖ + ‖rhs‖)`, with `‖M‖` estimated by its largest diagonal entry.
fn at_roundoff_floor<T: Scalar>(a: &CscMatrix<T>, d: &[T], rhs: &[T], q: &[T], relative_residual: T) -> bool {
    let mut diag = vec![T::zero(); a.nrows()];
    for j in 0..a.ncols() {
        let (rows, vals) = a.col(j);
        let w = d[j] * d[j];
        for (&i, &v) in rows.iter().zip(vals) {
            diag[i] += v * v * w;
        }
    }
    let m_norm = diag.into_iter().fold(T::zero(), T::max);
    let rhs_norm = norm2(rhs);
    let residual = relative_residual * rhs_norm.max(T::one());
    let floor = T::lit(1e3) * T::epsilon() * (m_norm * norm2(q) + rhs_norm);
    let ok = residual <= floor;
    if ok {
        log::debug!("accepting pcg at roundoff floor: residual {residual:e}, floor {floor:e}");
    }
    ok
}

/// PCG on the matrix-free normal operator with a fixed Cholesky preconditioner.
#[derive(Debug)]
pub struct PcgSolver<'f, T> {
    precond: &'f CholeskyFactor<T>,
    pub rel_tol: T,
    pub max_iter: usize,
    /// Residual of the most recent solve.
    pub last_residual: T,
    pub last_iterations: usize,
    stats: SolverStats,
}

impl<'f, T: Scalar> PcgSolver<'f, T> {
    pub fn new(precond: &'f CholeskyFactor<T>, rel_tol: T, max_iter: usize) -> Self {
        Self {
            precond,
            rel_tol,
            max_iter,
            last_residual: T::zero(),
            last_iterations: 0,
            stats: SolverStats::default(),
        }
    }
}

impl<T: Scalar> NormalSolver<T> for PcgSolver<'_, T> {
    /// Fails with `InexactDirection` when PCG does not reach `rel_tol`.
    fn solve_normal(&mut self, a: &CscMatrix<T>, d: &[T], rhs: &[T]) -> Result<Vec<T>> {
        let start = Instant::now();
        let mut op = NormalOperator::new(a, d, None);
        let out = pcg_solve(|v, o| op.apply(v, o), self.precond, rhs, self.rel_tol, self.max_iter)?;
        let elapsed = start.elapsed();
        self.stats.solves += 1;
        self.stats.cg_iterations += out.iterations;
        self.stats.solve_time += elapsed;
        self.stats.last_solve_time = elapsed;
        self.last_residual = out.relative_residual;
        self.last_iterations = out.iterations;
        if !out.converged && !at_roundoff_floor(a, d, rhs, &out.solution, out.relative_residual) {
            return Err(Error::InexactDirection {
                relative_residual: out.relative_residual.to_f64_lossy(),
            });
        }
        Ok(out.solution)
    }

    fn is_exact(&self) -> bool {
        false
    }

    fn stats(&self) -> &SolverStats {
        &self.stats
    }
}

/// Factor of `AAᵀ`, used for least-squares starts and feasibility repair.
pub fn aat_factor<T: Scalar>(a: &CscMatrix<T>) -> Result<CholeskyFactor<T>> {
    let ones = vec![T::one(); a.ncols()];
    let m = form_normal_matrix(a, &ones, None)?;
    let min_pivot = T::lit(RELATIVE_MIN_PIVOT) * m.max_abs_diag();
    CholeskyFactor::factorize(&m, min_pivot)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn direct_reuses_factor_for_same_scaling() {
        let a = CscMatrix::<f64>::from_dense(2, 3, &[1.0, 2.0, 0.0, 0.0, 1.0, 3.0]).unwrap();
        let mut s = DirectSolver::new();
        let d = [1.0, 0.5, 2.0];
        let q1 = s.solve_normal(&a, &d, &[1.0, 1.0]).unwrap();
        let q2 = s.solve_normal(&a, &d, &[1.0, 1.0]).unwrap();
        assert_eq!(q1, q2);
        assert_eq!(s.stats().factorizations, 1);
        s.solve_normal(&a, &[1.0, 1.0, 1.0], &[1.0, 1.0]).unwrap();
        assert_eq!(s.stats().factorizations, 2);
    }

    #[test]
    fn pcg_with_exact_preconditioner_matches_direct() {
        let a = CscMatrix::<f64>::from_dense(2, 3, &[1.0, 2.0, 0.0, 0.0, 1.0, 3.0]).unwrap();
        let d = [1.0, 0.5, 2.0];
        let mut direct = DirectSolver::new();
        let exact = direct.solve_normal(&a, &d, &[3.0, -1.0]).unwrap();
        let f = direct.take_factor().unwrap().1;
        let mut pcg = PcgSolver::new(&f, 1e-12, 10);
        let approx = pcg.solve_normal(&a, &d, &[3.0, -1.0]).unwrap();
        for (x, y) in exact.iter().zip(&approx) {
            assert!((x - y).abs() < 1e-12);
        }
        assert!(pcg.stats().cg_iterations <= 1);
    }

    #[test]
    fn pcg_reports_inexact_direction() {
        let a = CscMatrix::<f64>::identity(3);
        let f = aat_factor(&a).unwrap();
        let mut pcg = PcgSolver::new(&f, 1e-14, 1);
        let err = pcg.solve_normal(&a, &[1.0, 3.0, 10.0], &[1.0, 1.0, 1.0]).unwrap_err();
        assert!(matches!(err, Error::InexactDirection { .. }));
    }
}
