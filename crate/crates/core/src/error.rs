use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("non-triangular face {face} ({arity} vertices)")]
    NonTriangularFace { face: usize, arity: usize },

    #[error("face {face} references vertex {index} but the mesh has {count} vertices")]
    IndexOutOfRange { face: usize, index: usize, count: usize },

    #[error("face {face} repeats a vertex")]
    RepeatedVertex { face: usize },

    #[error("face {face} has zero area ({area:e})")]
    ZeroAreaFace { face: usize, area: f64 },

    #[error("non-manifold edge ({a}, {b}) shared by {count} faces")]
    NonManifoldEdge { a: usize, b: usize, count: usize },

    #[error("mesh is not orientable")]
    NonOrientable,

    #[error("vertex {0} is not referenced by any face")]
    IsolatedVertex(usize),

    #[error("mesh is disconnected")]
    Disconnected,

    #[error("invalid density: {0}")]
    InvalidDensity(String),

    #[error("size mismatch: expected {expected} values, got {got}")]
    SizeMismatch { expected: usize, got: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("linear solve failed: {0}")]
    Singular(String),

    #[error("pointwise projection did not converge (residual {residual:e})")]
    ProjectionFailed { residual: f64 },

    #[error("infeasible problem: {0}")]
    Infeasible(String),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}
