use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension error: {0}")]
    Dimension(String),
    #[error("matrix has non-finite entries")]
    NonFinite,
    #[error("matrix is singular")]
    SingularMatrix,
    #[error("spectra of A and -A_zeta overlap; Sylvester equation is not uniquely solvable")]
    SpectraOverlap,
    #[error("invalid vessel parameters: {0}")]
    InvalidParameters(String),
    #[error("invalid transform: {0}")]
    InvalidTransform(String),
    #[error("X is singular at (x, t) = ({x}, {t}); point lies outside the invertibility region")]
    SingularX { x: f64, t: f64 },
    #[error("lambda = {0} is too close to a pole of the transfer function")]
    PoleAtLambda(num_complex::Complex64),
    #[error("stencil too wide: need {needed} nodes along the axis, grid has {available}")]
    StencilTooWide { needed: usize, available: usize },
    #[error("log branch cut: argument jump of {jump:.3} rad between adjacent nodes")]
    BranchCut { jump: f64 },
    #[error("missing field: {0}")]
    MissingField(&'static str),
    #[error("division by a masked quantity: {0}")]
    DivisionMasked(&'static str),
    #[error("gamma_12 must be nonzero for the generalized KdV soliton")]
    GammaTwelveZero,
    #[error("invariant violated: {0}")]
    InvariantViolation(String),
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
}

pub type Result<T> = std::result::Result<T, Error>;
