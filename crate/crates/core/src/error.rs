use alloc::string::String;
use alloc::vec::Vec;

/// Errors raised by the numerical core.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("{op}: incompatible shapes {left:?} and {right:?}")]
    Shape {
        op: &'static str,
        left: Vec<usize>,
        right: Vec<usize>,
    },
    #[error("layer {layer}: {message}")]
    Layer { layer: usize, message: String },
    #[error("argmax over an empty mask")]
    EmptyMask,
    #[error("backward called before forward")]
    BackwardBeforeForward,
    #[error("non-finite gradient in {param}")]
    NonFiniteGradient { param: String },
    #[error("training diverged at {stage} {index}: loss is not finite")]
    Divergence { stage: &'static str, index: usize },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("invalid action {action}: {reason}")]
    InvalidAction { action: usize, reason: &'static str },
    #[error("index {index} out of range for length {len}")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("corrupted transition at step {step}: {reason}")]
    CorruptedTransition { step: usize, reason: &'static str },
    #[error("invalid data: {0}")]
    Data(String),
}

pub type Result<T> = core::result::Result<T, Error>;
