//! Sparse linear algebra: storage, normal matrices, Cholesky and PCG.

mod cholesky;
mod lanczos;
mod normal;
mod ordering;
mod pcg;
mod sparse;
pub mod vector;

pub use cholesky::{
    cholesky_factorize, factor_solve, CholeskyFactor, SymbolicCholesky, MAX_REGULARIZATION_RETRIES,
};
pub use lanczos::{generalized_condition_probe, generalized_extreme_eigenvalues, tridiagonal_extreme_eigenvalues};
pub use normal::{form_normal_matrix, NormalOperator};
pub use ordering::{invert_permutation, minimum_degree};
pub use pcg::{pcg_solve, CgOutcome};
pub use sparse::CscMatrix;
