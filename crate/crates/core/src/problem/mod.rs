mod iterate;
mod model;
pub mod mps;
mod standard;
mod symmetric;

pub use iterate::{
    barrier_gradient, convergence_metrics, dual_objective, residuals, IterateState, Metrics, Residuals,
};
pub use model::{Column, LpProblem, Row, RowKind, Sense};
pub use mps::{parse_mps, parse_mps_with_format, write_mps, MpsFormat};
pub use standard::{standard_to_problem, to_standard_form, RecoveryMap, StandardLp, VarRecovery};
pub use symmetric::{dualize, DualizedLp, SymmetricLp};
