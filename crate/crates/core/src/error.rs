use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    /// A matrix or vector whose stated shape disagrees with its entries.
    #[error("shape error: {0}")]
    Shape(String),

    /// The image of an incoming map is not contained in the kernel of the
    /// outgoing one, i.e. the operator does not square to zero.
    #[error("complex violation: {0}")]
    ComplexViolation(String),

    /// A model description that breaks one of its invariants.
    #[error("invalid model: {0}")]
    Validation(String),

    #[error("unsupported model: {0}")]
    UnsupportedModel(String),

    #[error("model mismatch: forms belong to different models")]
    ModelMismatch,

    #[error("parse error at {location}: {message}")]
    Parse { location: String, message: String },

    #[error("window error: {0}")]
    Window(String),

    /// A truncated symbol does not carry enough terms for the requested
    /// evaluation.
    #[error("insufficient truncation: {0}")]
    Truncation(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A filtered complex whose differential breaks d^2 = 0 or lowers the
    /// filtration weight.
    #[error("filtered complex invariant violated: {0}")]
    InvariantViolation(String),
}

impl Error {
    pub(crate) fn parse(location: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Parse { location: location.into(), message: message.into() }
    }
}
