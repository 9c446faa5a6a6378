use thiserror::Error;

/// Failure modes shared by every module.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("invalid mixture: {0}")]
    InvalidSpec(String),

    #[error("invalid measure: {0}")]
    InvalidMeasure(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("bracket [{lo}, {hi}] does not straddle the transition: {reason}")]
    Bracket { lo: f64, hi: f64, reason: String },

    #[error("{what} did not converge; last bracket [{lo}, {hi}]")]
    SolverFailure {
        what: &'static str,
        lo: f64,
        hi: f64,
    },

    #[error("integrand is not finite at node {node}")]
    NonFinite { node: f64 },

    #[error("numeric range exceeded: {0}")]
    NumericRange(String),
}

impl Error {
    /// Numeric failures map to exit code 3, everything else to 2.
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            Error::SolverFailure { .. } | Error::NonFinite { .. } | Error::NumericRange(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
