use thiserror::Error;

/// Failures reported by the numerical routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument violated an operation's precondition.
    #[error("domain error: {0}")]
    Domain(String),

    /// Adaptive quadrature could not meet its tolerance. The best estimate is kept.
    #[error("quadrature did not converge: {message} (best estimate {estimate:e} +/- {error_estimate:e})")]
    Convergence {
        message: String,
        estimate: f64,
        error_estimate: f64,
    },

    /// Small-SNR extrapolation was unstable on the requested grid.
    #[error("asymptotic estimation failed: {message} (estimates {estimates:?})")]
    Estimation {
        message: String,
        estimates: Vec<f64>,
    },

    /// A simulation produced a non-finite or degenerate state.
    #[error("numerical failure: {0}")]
    Numerical(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
