use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("boundary node {node} at ({x1}, {x2}) is not covered by any segment")]
    UncoveredBoundaryNode { node: usize, x1: f64, x2: f64 },

    #[error("segments `{first}` and `{second}` both claim boundary node {node}")]
    OverlappingSegments {
        node: usize,
        first: String,
        second: String,
    },

    #[error("unknown boundary segment `{0}`")]
    UnknownSegment(String),

    #[error("ellipticity violated at node {node}: diffusion coefficient {value}")]
    Ellipticity { node: usize, value: f64 },

    #[error("negative reaction coefficient {value} at node {node}")]
    NegativeReaction { node: usize, value: f64 },

    #[error("operator is not coercive: no Dirichlet node and the reaction coefficient vanishes")]
    NotCoercive,

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("matrix is not positive definite (pivot {pivot:e} at row {row})")]
    NotPositiveDefinite { row: usize, pivot: f64 },

    #[error("linear solver did not converge: relative residual {residual:e}")]
    LinearSolver { residual: f64 },

    #[error("infeasible constraints: {0}")]
    Infeasible(String),

    #[error("quadratic program hit the iteration limit ({0})")]
    QpIterationLimit(usize),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid obstacle: {0}")]
    InvalidObstacle(String),

    #[error("invalid friction data: {0}")]
    InvalidFriction(String),

    #[error("invalid GNEP instance: {0}")]
    InvalidGnep(String),

    #[error("unknown fixture `{0}`")]
    UnknownFixture(String),

    #[error("oracle: {0}")]
    Oracle(String),
}

pub type Result<T> = std::result::Result<T, Error>;
