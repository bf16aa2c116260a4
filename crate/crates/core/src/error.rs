use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeoError {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("size mismatch: expected {expected} samples, found {found}")]
    SizeMismatch { expected: usize, found: usize },

    #[error("under-resolved: {0}")]
    Resolution(String),

    #[error("solvability violated: right-hand side has mean {mean:e} (must integrate to zero)")]
    Solvability { mean: f64 },

    #[error("points coincide; distance-normalised quantity undefined")]
    ZeroDistance,

    #[error("dilatation budget infeasible: eps = {eps}, largest feasible eps is {max_eps}")]
    Budget { eps: f64, max_eps: f64 },

    #[error("invalid warped profile: {0}")]
    Profile(String),

    #[error("map is not strictly monotone: {0}")]
    NonMonotone(String),

    #[error("newton iteration failed after {iterations} iterations (residual {residual:e})")]
    Newton { iterations: usize, residual: f64 },

    #[error("curvature blow-up at t = {t}: max |Rm| = {max_rm:e}")]
    Blowup { t: f64, max_rm: f64 },

    #[error("scalar curvature is not constant (relative spread {spread:e}); metric is not Yamabe")]
    NotYamabe { spread: f64 },

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, GeoError>;
