//! Crate-wide error type.

use crate::phase::PhasePoint;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, thiserror::Error)]
pub enum Error {
    /// The branch gap `ξ² + b²(x₂)` fell below the configured floor at the
    /// given phase-space point.
    #[error("gap violation at {point:?}: xi^2 + b^2 = {gap:.3e} < floor {floor:.3e}")]
    GapViolation {
        point: PhasePoint,
        gap: f64,
        floor: f64,
    },

    /// A symbol varies too much per grid cell for the requested resolution.
    #[error("grid too coarse: {0}")]
    GridTooCoarse(String),

    /// The implicit midpoint iteration failed to converge.
    #[error("step rejected at t = {t}: midpoint iteration did not converge in {iters} iterations")]
    StepRejected { t: f64, iters: usize },

    /// A derivative evaluator failed at the given point.
    #[error("derivative unavailable at {0:?}")]
    DerivativeUnavailable(PhasePoint),

    /// An operator expected to be self-adjoint is not, within tolerance.
    #[error("operator not self-adjoint: defect {defect:.3e} > {tol:.3e}")]
    NotSelfAdjoint { defect: f64, tol: f64 },

    /// A spectral window contains no eigenvalues.
    #[error("empty spectral window ({lo}, {hi})")]
    EmptyWindow { lo: f64, hi: f64 },

    /// The support of the energy cutoff is not contained in the window.
    #[error("window mismatch: supp(g) = ({glo}, {ghi}) not inside window ({lo}, {hi})")]
    WindowMismatch { glo: f64, ghi: f64, lo: f64, hi: f64 },

    /// A wave packet does not fit in the box with the required margin.
    #[error("box too small: {0}")]
    BoxTooSmall(String),

    /// Wave mass near the periodic seam exceeded the trust threshold.
    #[error("edge mass {mass:.3e} exceeds {limit:.3e} at t = {t}; result untrusted")]
    EdgeMassExceeded { mass: f64, limit: f64, t: f64 },

    /// Mismatched grid or semiclassical parameter between two operators.
    #[error("operator mismatch: {0}")]
    OperatorMismatch(String),

    /// Invalid experiment configuration; one message per violation.
    #[error("invalid config: {}", .0.join("; "))]
    ConfigInvalid(Vec<String>),

    /// Dense linear algebra failure (non-convergence).
    #[error("eigendecomposition failed: {0}")]
    EigenFailed(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
