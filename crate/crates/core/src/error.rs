use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("face {face} references vertex {index}, but the mesh has {count} vertices")]
    IndexOutOfRange { face: usize, index: usize, count: usize },

    #[error("face {face} is not a triangle ({arity} vertices)")]
    NonTriangular { face: usize, arity: usize },

    #[error("face {face} repeats a vertex")]
    RepeatedVertex { face: usize },

    #[error("mesh is not edge-manifold: edge ({a}, {b}) {reason}")]
    NonManifold { a: usize, b: usize, reason: &'static str },

    #[error("mesh is empty")]
    EmptyMesh,

    #[error("mesh is degenerate: {0}")]
    Degenerate(String),

    #[error("face {face} has zero area ({area:e})")]
    ZeroAreaFace { face: usize, area: f64 },

    #[error("edge ({a}, {b}) is on the boundary and cannot be split")]
    BoundaryEdge { a: usize, b: usize },

    #[error("edge ({a}, {b}) does not exist or was invalidated by an earlier split")]
    StaleEdge { a: usize, b: usize },

    #[error("target geometry coincides with the shading point (distance {0:e})")]
    CoincidentTarget(f64),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("linear solver failure: {0}")]
    Solver(String),

    #[error("size mismatch: expected {expected}, got {got} ({what})")]
    SizeMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
