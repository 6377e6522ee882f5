use thiserror::Error;

/// Errors raised anywhere in the laboratory pipeline.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("parameter `{name}` must be positive, got {value}")]
    NonPositiveParameter { name: &'static str, value: f64 },

    #[error("stiffness alpha = {alpha} must exceed gamma^2 * beta = {coupling}")]
    StiffnessBelowCoupling { alpha: f64, coupling: f64 },

    #[error("invalid damping profile: {0}")]
    InvalidDamping(String),

    #[error("grid needs at least 2 elements, got {0}")]
    InvalidGrid(usize),

    #[error("mass matrix is not factorizable")]
    SingularMass,

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("{points} quadrature points cannot resolve {modes} modes (need at least {needed})")]
    QuadratureUnderResolved {
        points: usize,
        modes: usize,
        needed: usize,
    },

    #[error("shifted linear system is singular (zero pivot at row {row})")]
    LinearSolveFailure { row: usize },

    #[error("dense eigenvalue solve failed: {0}")]
    EigSolveFailure(String),

    #[error("energy Gram matrix is not symmetric positive definite")]
    FactorizationFailure,

    #[error("dense operation on a {size}x{size} matrix exceeds the cap of {cap}")]
    DenseSizeCap { size: usize, cap: usize },

    #[error("matrix exponential needs {squarings} squarings, above the limit of {limit}")]
    OverScaleLimit { squarings: u32, limit: u32 },

    #[error(
        "mode cutoff suspect at lambda = {lambda}: tail norms {tail:?} are not strictly decreasing"
    )]
    ModeCutoffSuspect { lambda: f64, tail: [f64; 3] },

    #[error("eigenvalue {re:+e}{im:+e}i of mode {mode} has positive real part")]
    PositiveRealPart { mode: usize, re: f64, im: f64 },

    #[error("degenerate power-law fit: {0}")]
    DegenerateFit(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Stable name of the variant, for reports.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::NonPositiveParameter { .. } => "NonPositiveParameter",
            Error::StiffnessBelowCoupling { .. } => "StiffnessBelowCoupling",
            Error::InvalidDamping(_) => "InvalidDamping",
            Error::InvalidGrid(_) => "InvalidGrid",
            Error::SingularMass => "SingularMass",
            Error::DimensionMismatch { .. } => "DimensionMismatch",
            Error::QuadratureUnderResolved { .. } => "QuadratureUnderResolved",
            Error::LinearSolveFailure { .. } => "LinearSolveFailure",
            Error::EigSolveFailure(_) => "EigSolveFailure",
            Error::FactorizationFailure => "FactorizationFailure",
            Error::DenseSizeCap { .. } => "DenseSizeCap",
            Error::OverScaleLimit { .. } => "OverScaleLimit",
            Error::ModeCutoffSuspect { .. } => "ModeCutoffSuspect",
            Error::PositiveRealPart { .. } => "PositiveRealPart",
            Error::DegenerateFit(_) => "DegenerateFit",
            Error::InvalidInput(_) => "InvalidInput",
        }
    }
}
