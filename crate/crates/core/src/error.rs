use thiserror::Error;

/// Errors raised by the model, solver and verification layers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument lies outside the domain of a special function or map.
    #[error("domain error: {0}")]
    Domain(String),

    /// An operator produced a target outside the physical tower while its
    /// coefficient did not vanish.
    #[error("invalid sector: {0}")]
    InvalidSector(String),

    /// A caller supplied an unusable request (empty family, bad enum value).
    #[error("usage error: {0}")]
    Usage(String),

    /// A set of parameters makes the requested equation degenerate.
    #[error("parameter error: {0}")]
    Parameter(String),

    /// No scalarization candidate reproduced the recurrences.
    #[error("calibration failure: {0}")]
    Calibration(String),

    /// A numerical refinement sequence did not settle.
    #[error("convergence error: {0}")]
    Convergence(String),
}

pub type Result<T> = std::result::Result<T, Error>;
