use thiserror::Error;

#[derive(Debug, Error)]
pub enum AdError {
    #[error("shape mismatch at layer {layer}: expected {expected}, got {got}")]
    ShapeMismatch {
        layer: usize,
        expected: String,
        got: String,
    },
    #[error("non-finite value produced at layer {layer} ({context})")]
    NonFinite { layer: usize, context: String },
    #[error("unknown parameter `{0}`")]
    UnknownParam(String),
    #[error("parameter `{name}` has mismatched shape: {expected} vs {got}")]
    ParamShape {
        name: String,
        expected: String,
        got: String,
    },
    #[error("non-finite gradient for parameter `{0}`")]
    NonFiniteGrad(String),
    #[error("invalid argument: {0}")]
    InvalidArg(String),
    #[error("FFT size {0} is not a power of two")]
    FftNonPowerOfTwo(usize),
}

pub type Result<T> = std::result::Result<T, AdError>;
