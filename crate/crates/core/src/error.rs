use thiserror::Error;

/// Errors raised by the numerical routines of this crate.
///
/// Infeasibility of a support configuration is *not* an error: solvers
/// return a solution flagged infeasible together with its diagnostics.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument lies outside the mathematical domain of the function.
    #[error("{function}: argument out of domain: {detail}")]
    Domain {
        function: &'static str,
        detail: String,
    },

    /// Two objects living in spaces of different dimension were combined.
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    /// A kernel or potential was evaluated at one of its singular points.
    #[error("singularity: {0}")]
    Singularity(String),

    /// A problem description violates its invariants.
    #[error("invalid problem: {0}")]
    InvalidProblem(String),

    /// A root finder could not bracket a sign change.
    #[error("root not bracketed: {0}")]
    NoBracket(String),

    /// A precondition of an operation does not hold.
    #[error("precondition violated: {0}")]
    Precondition(String),

    /// The requested combination of parameters is outside the implemented scope.
    #[error("unsupported: {0}")]
    Unsupported(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(function: &'static str, detail: impl Into<String>) -> Error {
    Error::Domain {
        function,
        detail: detail.into(),
    }
}
