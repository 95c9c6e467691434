use thiserror::Error;

/// Errors raised by tensor construction and layer evaluation.
#[derive(Debug, Error)]
pub enum TensorError {
    #[error("shape mismatch in {context}: expected {expected}, got {got}")]
    ShapeMismatch {
        context: &'static str,
        expected: String,
        got: String,
    },

    #[error("invalid dimension in {context}: {detail}")]
    InvalidDimension {
        context: &'static str,
        detail: String,
    },

    #[error("non-finite value in {context}")]
    NonFinite { context: &'static str },

    #[error("{context}: {detail}")]
    Unsupported {
        context: &'static str,
        detail: String,
    },

    #[error("i/o failure: {0}")]
    Io(#[from] std::io::Error),

    #[error("malformed tensor header: {0}")]
    Header(String),
}
