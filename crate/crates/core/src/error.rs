//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Clone, Error)]
pub enum Error {
    /// A caller-supplied parameter is outside its admissible range.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// Adaptive quadrature exhausted its refinement budget. The partial
    /// value and its error estimate are carried along so callers can still
    /// report them.
    #[error(
        "quadrature did not converge ({context}): partial value \
         {value_re:.6e} {value_im:+.6e}i, error estimate {estimate:.3e} \
         exceeds tolerance {tol:.3e} after {panels} panels"
    )]
    QuadratureFailure {
        context: String,
        value_re: f64,
        value_im: f64,
        estimate: f64,
        tol: f64,
        panels: usize,
    },

    /// A theorem hypothesis required by the requested check does not hold
    /// for the supplied data; reported rather than silently ignored.
    #[error("hypothesis not satisfied: {0}")]
    HypothesisViolation(String),

    /// The request is outside the supported regime (e.g. oscillation
    /// frequencies past the point where panel quadrature stays accurate).
    #[error("unsupported: {0}")]
    Unsupported(String),
}

pub type Result<T> = std::result::Result<T, Error>;
