use thiserror::Error;

/// Errors raised by the geometry toolkit.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("point {point:?} is outside the chart domain")]
    OutsideDomain { point: Vec<f64> },

    #[error("degenerate metric at {point:?}: {reason}")]
    DegenerateMetric { point: Vec<f64>, reason: String },

    #[error("derivative order {requested} exceeds the supported maximum {available}")]
    OrderExceeded { requested: usize, available: usize },

    #[error("non-finite derivative data at {point:?} (chart is not analytic there)")]
    NonAnalytic { point: Vec<f64> },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("degenerate plane: spanning vectors are linearly dependent")]
    DegeneratePlane,

    #[error("geodesic left the chart domain; last valid radius {last_radius}")]
    DomainExit { last_radius: f64 },

    #[error("conjugate point reached before radius {radius}")]
    ConjugatePoint { radius: f64 },

    #[error("invalid direction: {0}")]
    InvalidDirection(String),

    #[error("series error: {0}")]
    Series(String),

    #[error("truncation mismatch: {left} vs {right}")]
    TruncationMismatch { left: usize, right: usize },

    #[error("ill-conditioned fit (condition number {condition:.3e})")]
    IllConditioned { condition: f64 },

    #[error("profile is not radial: relative spread {spread:.3e} exceeds tolerance {tolerance:.3e}")]
    NotRadial { spread: f64, tolerance: f64 },

    #[error("conformal factor vanishes near t = {location}")]
    VanishingFactor { location: f64 },

    #[error("chart is not a geodesic normal chart; radial deformation needs r_P = |x|")]
    NotNormalChart,

    #[error("unknown metric family '{0}'")]
    UnknownFamily(String),

    #[error("invalid parameters: {0}")]
    InvalidParameters(String),

    #[error("fit failed: {0}")]
    FitFailed(String),
}

pub type Result<T> = std::result::Result<T, GeometryError>;
