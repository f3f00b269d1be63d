use num_complex::Complex64;
use thiserror::Error;

use crate::graph::VertexId;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("attachment vertex {0} is used by more than one branch")]
    DuplicateAttachment(usize),

    #[error("edge ({0}, {1}) has non-positive weight {2}")]
    NonPositiveWeight(usize, usize, f64),

    #[error("self-loop at compact vertex {0}")]
    SelfLoop(usize),

    #[error("edge ({0}, {1}) is listed twice")]
    DuplicateEdge(usize, usize),

    #[error("compact component is not connected (vertex {0} unreachable from 0)")]
    Disconnected(usize),

    #[error("coefficient rule has no finite bound: {0}")]
    UnboundedRule(String),

    #[error("invalid vertex {0:?}")]
    InvalidVertex(VertexId),

    #[error("compact index {index} out of range for component of size {size}")]
    CompactIndex { index: usize, size: usize },

    #[error("path length {n} exceeds the enumeration cap {cap}")]
    PathExplosion { n: usize, cap: usize },

    #[error("ball of radius {radius} holds {size} vertices, above the cap {cap}")]
    BallTooLarge { radius: usize, size: usize, cap: usize },

    #[error("vertex is at distance {dist}, not on the sphere of radius {n}")]
    NotOnBoundarySphere { dist: usize, n: usize },

    #[error("branching sequence is not eventually 1")]
    BranchingNotEventuallyOne,

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("matrix dimension {dim} exceeds cap {cap}")]
    DimensionCap { dim: usize, cap: usize },

    #[error("solution horizon {horizon} too short, need {needed}")]
    InsufficientHorizon { horizon: usize, needed: usize },

    #[error("boundary angles must differ")]
    EqualAngles,

    #[error("both solution norms vanish")]
    DegenerateNorms,

    #[error("spectral parameter {0} is not in the upper half-plane")]
    NotUpperHalfPlane(Complex64),

    #[error("m-function did not converge at z = {z} (depth {depth}, last change {last_change:e})")]
    MFunctionNonConvergence {
        z: Complex64,
        depth: usize,
        last_change: f64,
    },

    #[error("singular linear system")]
    SingularSystem,

    #[error("vertex {0:?} is not in the compact component")]
    NotInCompact(VertexId),

    #[error("energy {0} is not in the singular regime")]
    NonSingularRegime(f64),

    #[error("reconstruction pivot vanished at branch depth {0}")]
    RankDeficient(usize),

    #[error("sector {k} out of range for m = {m}")]
    SectorOutOfRange { k: usize, m: usize },

    #[error("vector is not in sector {k} (residual {residual:e})")]
    NotInSector { k: usize, residual: f64 },

    #[error("dense cap exceeded: dimension {dim} > {cap}")]
    DenseCapExceeded { dim: usize, cap: usize },
}

pub type Result<T> = std::result::Result<T, Error>;
