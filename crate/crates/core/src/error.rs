use thiserror::Error;

/// Every failure the library can report.
///
/// Variants carry enough numeric context (residuals, ratios, offending
/// indices) for a caller to decide whether a failure is an input problem or
/// a resolution problem that a finer grid would fix.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("structure-constant array is not cubic")]
    NotCubic,

    #[error("antisymmetry violated at ({i},{j},{k}): residual {residual:e}")]
    AntisymmetryViolation { i: usize, j: usize, k: usize, residual: f64 },

    #[error("Jacobi identity violated for triple ({i},{j},{k}): residual {residual:e}")]
    JacobiViolation { i: usize, j: usize, k: usize, residual: f64 },

    #[error("algebra is not solvable: derived series stalls at dimension {stalled_at}")]
    NotSolvable { stalled_at: usize },

    #[error("not an MD4 algebra: {reason}")]
    NotMd4 { reason: String },

    #[error("Jordan structure undecidable at working tolerance: {reason}")]
    DegenerateJordan { reason: String },

    #[error("unknown family: {0}")]
    UnknownFamily(String),

    #[error("sample point {index} lies on the 0-dimensional stratum")]
    StratumMismatch { index: usize },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("exactness checks are only implemented for free abelian groups")]
    TorsionUnsupported,

    #[error("loop is singular at parameter {at}: |det| = {det:e}")]
    SingularLoop { at: f64, det: f64 },

    #[error("winding integral {raw} is not within 1e-6 of an integer (grid too coarse?)")]
    NonIntegerResult { raw: f64 },

    #[error("loop endpoints differ by {gap:e}")]
    EndpointMismatch { gap: f64 },

    #[error("unknown space: {0}")]
    UnknownSpace(String),

    #[error("bad parameters: {0}")]
    BadParams(String),

    #[error("grid too coarse: quadrature defect estimate {estimate:e} exceeds 1e-6")]
    GridTooCoarse { estimate: f64 },

    #[error("spectral gap ratio {ratio:e} is below 100; refine the grid")]
    GapTooSmall { ratio: f64 },

    #[error("kernel asymptotics mismatch: {0}")]
    AsymptoticMismatch(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("i/o error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}
