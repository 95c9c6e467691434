use thiserror::Error;

#[derive(Debug, Error)]
pub enum AttentionError {
    #[error(transparent)]
    Tensor(#[from] foa_tensor::TensorError),

    #[error(transparent)]
    Geometry(#[from] foa_geometry::GeometryError),

    #[error("shape mismatch in {context}: expected {expected}, got {got}")]
    ShapeMismatch {
        context: &'static str,
        expected: String,
        got: String,
    },

    #[error("invalid input in {context}: {detail}")]
    InvalidInput {
        context: &'static str,
        detail: String,
    },

    #[error("{context}: metric undefined: {detail}")]
    UndefinedMetric {
        context: &'static str,
        detail: String,
    },

    #[error("i/o failure: {0}")]
    Io(#[from] std::io::Error),

    #[error("malformed file {path}: {detail}")]
    Parse { path: String, detail: String },

    #[error("training diverged: {0}")]
    Diverged(String),
}
