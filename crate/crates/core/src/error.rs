use thiserror::Error;

/// Errors surfaced by the laboratory.  Precondition violations are reported
/// as typed errors rather than panics so that callers (CLI, sweeps) can skip
/// or flag the offending sample.
#[derive(Debug, Error)]
pub enum Error {
    /// A parameter is outside the mathematical domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// The grid is too coarse to resolve the requested modes.
    #[error("resolution error: need at least {needed} cells per axis, got {got}")]
    Resolution { needed: usize, got: usize },

    /// A field and a spectrum (or two fields) refer to different grids.
    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    /// A shifted system is singular: the shift hits the operator spectrum.
    #[error("singular system: shift {shift} lies on the spectrum")]
    Singular { shift: num_complex::Complex64 },

    /// The operator has a zero eigenvalue, so an unshifted power is undefined.
    /// Apply a positive shift first.
    #[error("operator has a zero eigenvalue; unshifted fractional or imaginary powers are undefined. Apply a positive shift")]
    ZeroMode,

    /// An ensemble or sample budget is below the contract minimum.
    #[error("insufficient samples: {0}")]
    InsufficientSamples(String),

    /// Malformed configuration or serialized container.
    #[error("format error: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, Error>;
