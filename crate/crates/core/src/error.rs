use thiserror::Error;

use crate::shots::DoubleGaussianFit;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// Errors produced by the simulation and fitting routines.
#[derive(Debug, Error)]
pub enum Error {
    /// An input violated a documented precondition (negative photon number,
    /// gain below unity, unphysical coherence record, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// Covariance factorization failed; the message carries the offending
    /// pivot so degenerate inputs can be diagnosed.
    #[error("covariance factorization failed: {0}")]
    Covariance(String),

    /// A fit had a rank-deficient or otherwise unusable design.
    #[error("fit error: {0}")]
    FitDegenerate(String),

    /// The iterative mixture fit hit its iteration cap. Carries the
    /// best-so-far parameters and their residual.
    #[error("fit did not converge after {iterations} iterations (residual {residual:e})")]
    FitNonConvergence {
        iterations: usize,
        residual: f64,
        best: Box<DoubleGaussianFit>,
    },

    /// A serialized shot set or data file could not be parsed.
    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
