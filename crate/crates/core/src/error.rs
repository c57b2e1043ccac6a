use thiserror::Error;

/// Errors raised by operators, resolvents and solvers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got} ({context})")]
    DimensionMismatch {
        expected: usize,
        got: usize,
        context: &'static str,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("metric is not symmetric positive definite: {0}")]
    InvalidMetric(String),

    #[error("step-size condition violated (margin {margin:.3e})")]
    ConditionViolated { margin: f64 },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("singular system: {0}")]
    Singular(String),

    #[error("non-finite value produced by {0}")]
    NonFinite(&'static str),

    #[error(
        "inner solver did not converge after {iterations} iterations (residual {residual:.3e})"
    )]
    InnerSolver { iterations: usize, residual: f64 },

    #[error("iteration {iteration}: {source}")]
    Step {
        iteration: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("block {block}: {source}")]
    Block {
        block: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("certification failed: subgradient residual {residual:.3e} exceeds {limit:.3e}")]
    Certification { residual: f64, limit: f64 },

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("image format: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn at_iteration(self, iteration: usize) -> Self {
        Error::Step {
            iteration,
            source: Box::new(self),
        }
    }

    pub(crate) fn in_block(self, block: usize) -> Self {
        Error::Block {
            block,
            source: Box::new(self),
        }
    }
}

pub(crate) fn check_dim(expected: usize, got: usize, context: &'static str) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            expected,
            got,
            context,
        })
    }
}
