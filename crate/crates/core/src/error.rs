use thiserror::Error;

/// Failures raised by the numerical routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// Inputs outside the region where the quantity is defined.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    /// An iterative method hit its iteration cap. Carries the last estimate.
    #[error("no convergence after {iterations} iterations (last estimate {last_estimate:e}, residual {residual:e})")]
    NoConvergence {
        iterations: usize,
        last_estimate: f64,
        residual: f64,
    },

    /// A quantity left the representable floating point range.
    #[error("overflow: {0}")]
    Overflow(String),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    /// Short machine-readable code used in sweep cells and FFI status values.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Domain(_) => "domain",
            Error::Unsupported(_) => "unsupported",
            Error::NoConvergence { .. } => "no_convergence",
            Error::Overflow(_) => "overflow",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
