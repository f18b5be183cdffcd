use thiserror::Error;

/// Failure classes shared by every stage of the pipeline.
///
/// The CLI maps `Validation`/`Geometry*`/`Threshold`/`Regime` to exit code 2,
/// `Solver` to 3 and `Unconverged` to 4.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    Validation(String),
    #[error("geometry conflict: {0}")]
    GeometryConflict(String),
    #[error("geometry is not symmetric about x = 0: {0}")]
    NotSymmetric(String),
    #[error("wavenumber {k} is within {gap:.3e} of cutoff {cutoff}")]
    Threshold { k: f64, cutoff: f64, gap: f64 },
    #[error("unsupported modal regime: {0}")]
    Regime(String),
    #[error("solver failure: {0}")]
    Solver(String),
    #[error("design search did not converge: {0}")]
    Unconverged(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::Validation(msg.into())
}
