use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GridError {
    #[error("interval [{a}, {b}] is empty or not finite")]
    BadInterval { a: f64, b: f64 },
    #[error("grid spacing {0} must be positive")]
    BadSpacing(f64),
    #[error("grid has {n_cells} cells, at least {required} needed")]
    TooFewCells { n_cells: usize, required: usize },
    #[error("a periodic grid is required")]
    NotPeriodic,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StencilError {
    #[error("field length {got} does not match grid length {expected}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("offset {offset} at node {node} needs ghost data that was not supplied")]
    MissingGhost { node: usize, offset: isize },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("matrix is singular (pivot {pivot} vanished)")]
    Singular { pivot: usize },
    #[error("entry ({row}, {col}) lies outside the band")]
    OutsideBand { row: usize, col: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolveError {
    #[error("Newton iteration did not converge in {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("Newton produced a non-finite iterate after {iterations} iterations")]
    NonFinite { iterations: usize },
    #[error(transparent)]
    Linear(#[from] LinalgError),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SchemeError {
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error("density G{0} is not defined for this family")]
    UndefinedDensity(usize),
    #[error("parameters are for {expected}, not {got}")]
    WrongFamily { expected: String, got: String },
    #[error("invalid parameter: {0}")]
    BadParameter(String),
    #[error(transparent)]
    Linear(#[from] LinalgError),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricError {
    #[error("exact solution has zero norm")]
    ZeroNorm,
    #[error("errors must be positive, got {0}")]
    NonPositive(f64),
    #[error("step sizes must be distinct and positive")]
    BadSteps,
    #[error("length mismatch: {0} vs {1}")]
    Length(usize, usize),
}
