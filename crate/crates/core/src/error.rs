use thiserror::Error;

use crate::scene::NodeId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("point is behind the camera (depth {depth:.6})")]
    BehindCamera { depth: f64 },

    #[error("degenerate convex hull: input points are collinear or too few")]
    DegenerateHull,

    #[error("dangling support edge: node {supported} references missing supporter {supporter}")]
    DanglingEdge { supported: NodeId, supporter: NodeId },

    #[error("no hoi prior for action `{0}`")]
    MissingPrior(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("temperature must be positive, got {0}")]
    InvalidTemperature(f64),

    #[error("pose cannot be lifted: {0}")]
    UnliftablePose(String),

    #[error("initialization failed: {0}")]
    Initialization(String),

    #[error("scene generation failed: {0}")]
    Generation(String),

    #[error("metrics undefined: {0}")]
    UndefinedMetrics(String),

    #[error("schema error: {0}")]
    Schema(String),

    #[error("config error: {0}")]
    Config(String),
}
