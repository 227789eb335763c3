use thiserror::Error;

/// Errors raised by the library. The CLI maps these onto exit codes.
#[derive(Error, Debug, Clone, PartialEq)]
pub enum CornerError {
    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("eigen index {index} out of range (spectrum has {len} entries)")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("wrong boundary condition: {0}")]
    WrongBc(String),

    #[error("spectral collision: line eta={eta} is within {dist:.3e} of eigenvalue {lambda}")]
    SpectralCollision { eta: f64, lambda: f64, dist: f64 },

    #[error("tail energy ratio {ratio:.3e} exceeds tolerance {tol:.3e} ({what})")]
    TailEnergy { ratio: f64, tol: f64, what: String },

    #[error("fit residual {residual:.3e} exceeds tolerance {tol:.3e}")]
    FitResidual { residual: f64, tol: f64 },

    #[error("corner cancellation check failed: {0}")]
    Cancellation(String),

    #[error("resonance margin violated: |k+1+eps - lambda| = {margin:.3e} < {tol:.3e}")]
    ResonanceMargin { margin: f64, tol: f64 },

    #[error("cutoff {0}")]
    Cutoff(String),

    #[error("inconclusive fit: {0}")]
    Inconclusive(String),
}

impl CornerError {
    /// Name of the numerical guard that tripped, if this is a guard error.
    pub fn guard_name(&self) -> Option<&'static str> {
        match self {
            CornerError::SpectralCollision { .. } => Some("spectral-collision"),
            CornerError::TailEnergy { .. } => Some("tail-energy"),
            CornerError::FitResidual { .. } => Some("fit-residual"),
            CornerError::Cancellation(_) => Some("corner-cancellation"),
            CornerError::ResonanceMargin { .. } => Some("resonance-margin"),
            CornerError::Inconclusive(_) => Some("inconclusive-fit"),
            _ => None,
        }
    }
}

pub type Result<T> = std::result::Result<T, CornerError>;
