use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension {0} is outside the supported range 2..={max}", max = crate::MAX_DIM)]
    UnsupportedDimension(usize),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("non-finite entry in input")]
    NonFinite,

    #[error("index {index} out of range for dimension {n}")]
    IndexOutOfRange { index: usize, n: usize },

    #[error("degree {degree} out of range (allowed {min}..={max})")]
    DegreeOutOfRange { degree: usize, min: usize, max: usize },

    #[error("invalid cone: {0}")]
    InvalidCone(String),

    #[error("invalid operator: {0}")]
    InvalidOperator(String),

    #[error("eigenvalue vector {values:?} is not admissible for {cone}")]
    NotAdmissible { cone: String, values: Vec<f64> },

    #[error("operator value {value} is not normalized to 1")]
    NotNormalized { value: f64 },

    #[error("parameter `{name}` must be positive, got {value}")]
    NonPositiveParameter { name: &'static str, value: f64 },

    #[error("invalid domain: {0}")]
    InvalidDomain(String),

    #[error("node {0} is not an interior node")]
    NodeNotInterior(usize),

    #[error("at node {node} {position:?}: {source}")]
    AtNode {
        node: usize,
        position: Vec<f64>,
        source: Box<Error>,
    },

    #[error("newton iteration limit {iterations} reached with residual {residual:e}")]
    MaxIterations { iterations: usize, residual: f64 },

    #[error("line search stagnated (step {step:e}) at residual {residual:e}")]
    LineSearchStagnation { step: f64, residual: f64 },

    #[error("linear solve failed after {iterations} iterations (relative residual {relative_residual:e})")]
    LinearSolve {
        iterations: usize,
        relative_residual: f64,
    },

    #[error("field value {value} at node {node} is not negative")]
    NonNegativeValue { node: usize, value: f64 },

    #[error("least-squares fit is underdetermined: {nodes} nodes for {unknowns} unknowns")]
    Underdetermined { nodes: usize, unknowns: usize },

    #[error("blow-down source: {0}")]
    Blowdown(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

impl Error {
    pub(crate) fn at_node(self, node: usize, position: Vec<f64>) -> Self {
        Error::AtNode {
            node,
            position,
            source: Box::new(self),
        }
    }
}
