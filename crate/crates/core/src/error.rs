use thiserror::Error;

/// Errors raised by the solver library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("scaling entry {index} is not strictly positive and finite")]
    NonPositiveScaling { index: usize },

    #[error("cholesky factorization failed after regularization reached {regularization:e}")]
    FactorizationFailed { regularization: f64 },

    #[error("numerical breakdown: {0}")]
    NumericalBreakdown(&'static str),

    #[error("iterative solve stopped at relative residual {relative_residual:e}")]
    InexactDirection { relative_residual: f64 },

    #[error("variable {index} left the open box (0, u)")]
    InteriorityViolation { index: usize },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("model error: {0}")]
    Model(String),

    #[error("need at least {needed} records, found {found}")]
    InsufficientData { needed: usize, found: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_len(context: &'static str, expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            context,
            expected,
            found,
        })
    }
}
