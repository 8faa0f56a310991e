use thiserror::Error;

/// Errors raised while building or solving the SMPM Schur system.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("assembly failure: {0}")]
    AssemblyFailure(String),

    #[error("preconditioner failure: {0}")]
    PreconditionerFailure(String),

    #[error("null space is not one-dimensional: {0}")]
    RankDeficiency(String),

    #[error("operator has no null space: smallest singular value {sigma_min:e} (relative {relative:e})")]
    NoNullSpace { sigma_min: f64, relative: f64 },

    #[error("size limit exceeded: {what} has dimension {size}, cap is {cap}")]
    SizeLimit {
        what: &'static str,
        size: usize,
        cap: usize,
    },

    #[error("sparse factorization failed: {0}")]
    Factorization(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_len(context: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            context,
            expected,
            got,
        })
    }
}
