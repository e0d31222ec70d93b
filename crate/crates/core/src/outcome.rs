use std::fmt;
use std::time::Duration;

use crate::problem::{IterateState, Metrics};
use crate::trace::TraceRecord;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    IterationLimit,
    NumericalFailure,
}

impl fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SolveStatus::Optimal => "optimal",
            SolveStatus::IterationLimit => "iteration_limit",
            SolveStatus::NumericalFailure => "numerical_failure",
        })
    }
}

/// Per-phase counters; engines without phases fill only their own half.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PhaseSummary {
    pub pd_iterations: usize,
    pub primal_iterations: usize,
    pub pd_factorizations: usize,
    pub primal_factorizations: usize,
    pub pd_time: Duration,
    pub primal_time: Duration,
    /// Iteration index at which the hybrid switched to the primal engine.
    pub switch_iteration: Option<usize>,
    pub fell_back: bool,
}

#[derive(Clone, Debug)]
pub struct SolveResult<T> {
    pub status: SolveStatus,
    pub state: IterateState<T>,
    /// `cᵀx` of the standard-form problem.
    pub objective: T,
    pub metrics: Metrics<T>,
    pub iterations: usize,
    /// Normal-matrix factorizations.
    pub factorizations: usize,
    pub cg_iterations: usize,
    pub trace: Vec<TraceRecord>,
    /// `x_0, x_1, …` when recording was requested.
    pub iterates: Vec<Vec<T>>,
    /// Dual slacks `s` matching `iterates`.
    pub dual_iterates: Vec<Vec<T>>,
    pub phases: PhaseSummary,
    pub wall_time: Duration,
    /// Reason for a numerical failure.
    pub failure: Option<String>,
}
