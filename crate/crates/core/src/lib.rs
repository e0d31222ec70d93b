//! Interior point methods for sparse linear programs: a Mehrotra primal-dual
//! engine, a primal barrier engine that reuses cached normal-matrix factors
//! through delayed scaling, and a hybrid that switches from the first to the
//! second near convergence.
//!
//! Everything numeric is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below fix `f64`.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod error;
pub mod generate;
pub mod hybrid;
pub mod linalg;
mod outcome;
pub mod pdipm;
pub mod pipm;
pub mod probe;
pub mod problem;
mod scalar;
pub mod scaling;
pub mod solver;
pub mod trace;

pub use error::{Error, Result};
pub use outcome::{PhaseSummary, SolveResult, SolveStatus};
pub use scalar::Scalar;

pub type SparseMatrix = linalg::CscMatrix<f64>;
pub type Factor = linalg::CholeskyFactor<f64>;
pub type Lp = problem::LpProblem<f64>;
pub type StandardLp64 = problem::StandardLp<f64>;
pub type Iterate = problem::IterateState<f64>;
pub type PrimalConfig64 = pipm::PrimalConfig<f64>;
pub type PdConfig64 = pdipm::PdConfig<f64>;
pub type SwitchPolicy64 = hybrid::SwitchPolicy<f64>;
pub type SolveResult64 = SolveResult<f64>;
