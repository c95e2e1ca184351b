use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("grid needs at least 2 points, got {0}")]
    GridTooShort(usize),

    #[error("grid is not strictly increasing at index {0}")]
    GridNotIncreasing(usize),

    #[error("non-finite value {value} at z = {z}")]
    NonFinite { z: f64, value: f64 },

    #[error("operands are defined on different knot sets")]
    KnotMismatch,

    #[error("operation needs at least one operand")]
    Empty,

    #[error("left extension gives {extension} at the first knot, expected {value}")]
    LeftExtensionMismatch { extension: f64, value: f64 },

    #[error("invalid {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("{scheme} scheme cannot produce a {bound} bound")]
    SchemeMismatch {
        scheme: &'static str,
        bound: &'static str,
    },

    #[error("refinement ladder is not nested: {0}")]
    NotNested(String),

    #[error("step t = {step}: {source}")]
    Step { step: usize, source: Box<Error> },
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn at_step(self, step: usize) -> Self {
        match self {
            e @ Error::Step { .. } => e,
            e => Error::Step {
                step,
                source: Box::new(e),
            },
        }
    }
}
