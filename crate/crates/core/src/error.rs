//! Error type shared across the crate.

/// Errors surfaced by tensors, the tape, environments, and agents.
#[derive(Debug, thiserror::Error)]
pub enum CoreError {
    #[error("shape mismatch in {context}: expected {expected}, got {got}")]
    ShapeMismatch {
        context: String,
        expected: String,
        got: String,
    },

    #[error("layer {layer}: input dimension {got} does not match in_dim {expected}")]
    LayerDimension {
        layer: usize,
        expected: usize,
        got: usize,
    },

    #[error("non-finite value in {context}")]
    NonFinite { context: String },

    #[error("backward requires a scalar loss node, got {numel} elements")]
    NonScalarLoss { numel: usize },

    #[error("{what} out of range: {value} (expected {range})")]
    OutOfRange {
        what: &'static str,
        value: f64,
        range: &'static str,
    },

    #[error("index {index} out of range for {what} of size {size}")]
    IndexOutOfRange {
        what: &'static str,
        index: usize,
        size: usize,
    },

    #[error("cannot step a finished episode; call reset first")]
    EpisodeDone,

    #[error("replay buffer is empty")]
    EmptyBuffer,

    #[error("mask length {got} does not match ensemble size {expected}")]
    MaskLength { expected: usize, got: usize },

    #[error("{0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, CoreError>;
