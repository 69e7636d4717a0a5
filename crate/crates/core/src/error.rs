use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("geometry lengths must be strictly positive (got {0})")]
    NonPositiveLength(f64),
    #[error("resolution {got} is below the minimum of {min} cells")]
    ResolutionTooSmall { got: usize, min: usize },
    #[error("invalid space: {0}")]
    InvalidSpace(String),
    #[error("time must be strictly positive (got {0})")]
    NonPositiveTime(f64),
    #[error("spectral truncation insufficient at t = {t}: {detail}")]
    SpectralTruncationInsufficient { t: f64, detail: String },
    #[error("unsupported geometry: {0}")]
    UnsupportedGeometry(String),
    #[error("unsupported backend: {0}")]
    UnsupportedBackend(String),
    #[error("no derivative source: field has no slope oracle and the space is not a grid")]
    NoDerivativeSource,
    #[error("set has no boundary description")]
    NoBoundaryOracle,
    #[error("breakpoints must be strictly increasing")]
    UnsortedBreakpoints,
    #[error("field length {got} does not match space with {expected} points")]
    LengthMismatch { got: usize, expected: usize },
    #[error("pair budget exceeded: {pairs} pairs > budget {budget}")]
    PairBudgetExceeded { pairs: u64, budget: u64 },
    #[error("radius {radius} is not above the grid spacing {spacing}")]
    RadiusBelowResolution { radius: f64, spacing: f64 },
    #[error("field must be constant within {margin} of the boundary of an open geometry")]
    WindowViolation { margin: f64 },
    #[error("point {0} is not a jump point of the set")]
    NotAJumpPoint(f64),
    #[error(
        "resolution guard violated: sqrt(kernel time) = {scale:.3e} < 10 x spacing {spacing:.3e}; \
         need at least {min_cells} cells per axis"
    )]
    ResolutionGuardViolated {
        scale: f64,
        spacing: f64,
        min_cells: usize,
    },
    #[error("degenerate fit: {0}")]
    DegenerateFit(String),
    #[error("space with {0} points is too large for pair enumeration (max 512)")]
    SpaceTooLarge(usize),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("sidecar format error: {0}")]
    Sidecar(String),
    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
