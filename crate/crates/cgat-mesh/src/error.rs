use thiserror::Error;

pub type Result<T> = std::result::Result<T, MeshError>;

#[derive(Debug, Error)]
pub enum MeshError {
    #[error("malformed file at line {line}: {detail}")]
    MalformedFile { line: usize, detail: String },
    #[error("non-triangular face at line {line} ({arity} vertices)")]
    NonTriangleFace { line: usize, arity: usize },
    #[error("face index {index} out of range for {count} vertices")]
    IndexOutOfRange { index: u32, count: usize },
    #[error("degenerate face with repeated vertex index {index}")]
    DegenerateFace { index: u32 },
    #[error("mesh is too small: {vertices} vertices (need at least 4)")]
    TooFewVertices { vertices: usize },
    #[error("non-manifold input: {detail}")]
    NonManifoldInput { detail: String },
    #[error("decimation target {target} exceeds vertex count {vertices}")]
    TargetTooLarge { target: usize, vertices: usize },
    #[error("decimation target {target} is below the minimum of 4")]
    TargetTooSmall { target: usize },
    #[error("degenerate mesh: all vertices coincide")]
    DegenerateMesh,
    #[error("feature channel {channel} is constant (min equals max)")]
    ConstantChannel { channel: &'static str },
    #[error("field length {field} does not match vertex count {vertices}")]
    FieldLengthMismatch { field: usize, vertices: usize },
    #[error("invalid shape parameters: {detail}")]
    InvalidParams { detail: String },
    #[error("non-finite value in {context}")]
    NonFinite { context: &'static str },
    #[error("io failure: {0}")]
    IoFailure(#[from] std::io::Error),
}
