use thiserror::Error;

/// Errors raised anywhere in the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum FemError {
    #[error("division by a dual number with zero value")]
    DivisionByZeroDual,
    #[error("argument {value} outside the domain [{lo}, {hi}]")]
    Domain { value: f64, lo: f64, hi: f64 },
    #[error("index {index} out of range for degree {degree}")]
    Index { index: usize, degree: usize },
    #[error("collapsed coordinate singular: denominator {denominator:e}")]
    SingularCollapse { denominator: f64 },
    #[error("degenerate cell {cell}: |det J| = {det:e}")]
    DegenerateCell { cell: usize, det: f64 },
    #[error("cell {cell} references missing vertex {vertex}")]
    BadIndex { cell: usize, vertex: usize },
    #[error("invalid parameter: {0}")]
    InvalidParam(String),
    #[error("parse error at {context}: {message}")]
    Parse { context: String, message: String },
    #[error("i/o error: {0}")]
    Io(String),
    #[error("unsupported quadrature degree {0}")]
    UnsupportedDegree(usize),
    #[error("singular parameter relation: {0}")]
    SingularLimit(String),
    #[error("space mismatch: {0}")]
    SpaceMismatch(String),
    #[error("degenerate edge of length {0:e}")]
    SingularEdge(f64),
    #[error("degenerate face with area {0:e}")]
    DegenerateFace(f64),
    #[error("matrix is not positive definite")]
    NotPositiveDefinite,
    #[error("iterative solver did not converge: relative residual {residual:e} after {iterations} iterations")]
    NonConvergence { iterations: usize, residual: f64 },
    #[error("point {0:?} is outside the mesh")]
    PointOutsideMesh(Vec<f64>),
}

pub type Result<T> = std::result::Result<T, FemError>;
