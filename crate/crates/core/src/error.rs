use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LefError {
    #[error("point lies on the cut locus (margin {margin:e})")]
    CutLocusViolation { margin: f64 },
    #[error("tangent vector based at a different point")]
    BaseMismatch,
    #[error("conjugate point along geodesic of length {d}")]
    ConjugatePoint { d: f64 },
    #[error("matrix is not antisymmetric (defect {defect:e})")]
    NotAntisymmetric { defect: f64 },
    #[error("unsupported manifold for this operation: {0}")]
    UnsupportedManifold(String),
    #[error("non-finite density {value} at node {index} ({coords:?})")]
    NonFiniteDensity { index: usize, coords: Vec<f64>, value: f64 },
    #[error("degenerate fixed set: {0}")]
    DegenerateFixedSet(String),
    #[error("degenerate fixed point record at {0:?}")]
    DegenerateRecord(Vec<f64>),
    #[error("fixed submanifold violates the clean intersection condition")]
    CleanIntersectionViolation,
    #[error("vector field vanishes on the sampling circle")]
    ZeroOnCircle,
    #[error("fixed set is empty")]
    EmptyFixedSet,
    #[error("cut set of the map is not finite")]
    NonFiniteCutSet,
    #[error("map does not act on this manifold: {0}")]
    ManifoldMismatch(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, LefError>;
