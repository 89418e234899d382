use num_complex::Complex64;
use std::path::PathBuf;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("frequency {0} is outside the right half-plane (Re s must be > 0)")]
    NotInRightHalfPlane(Complex64),

    #[error("invalid boundary condition parameters: {0}")]
    InvalidTransferSpec(String),

    #[error("boundary condition configuration: {0}")]
    TransferConfig(String),

    #[error("{path}:{line}: {msg}")]
    MeshParse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("face {face} has {count} vertices; only triangles are supported")]
    NonTriangleFace { face: usize, count: usize },

    #[error("edge ({0}, {1}) is shared by {2} triangles; surface is not a closed 2-manifold")]
    NonManifoldEdge(usize, usize, usize),

    #[error("surface is not orientable (component containing triangle {0})")]
    NonOrientable(usize),

    #[error("triangle {0} is degenerate")]
    DegenerateTriangle(usize),

    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("no quadrature rule for order {0}")]
    QuadratureOrder(usize),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("linear solve failed{} (s = {s}): {msg}", index.map(|i| format!(" at frequency index {i}")).unwrap_or_default())]
    SolveFailed {
        index: Option<usize>,
        s: Complex64,
        msg: String,
    },

    #[error("symbol evaluation failed at contour node {index} (s = {s})")]
    SymbolEvaluation { index: usize, s: Complex64 },

    #[error("invalid convolution quadrature scheme: {0}")]
    InvalidScheme(String),

    #[error("point {0:?} is not inside the obstacle")]
    PointNotInside([f64; 3]),

    #[error("config key `{key}`: {msg}")]
    Config { key: String, msg: String },

    #[error("{0}")]
    Precondition(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
