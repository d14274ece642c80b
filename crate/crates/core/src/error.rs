use thiserror::Error;

/// Errors produced by the analysis library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// A numerical routine failed (non-convergence, overflow, solver breakdown).
    #[error("numerical failure: {message}")]
    Numerical {
        message: String,
        iterations: Option<usize>,
    },

    #[error("precondition violated: {0}")]
    Precondition(String),

    /// An enumeration or generator budget was exceeded.
    #[error("capacity exceeded: {0}")]
    Capacity(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    /// The set is not full-dimensional in its ambient space.
    #[error("set is flat: affine dimension {affine_dim} in ambient dimension {ambient}")]
    Rank { affine_dim: usize, ambient: usize },

    #[error("unknown scenario `{name}` (available: {})", available.join(", "))]
    UnknownScenario {
        name: String,
        available: Vec<String>,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn numerical(message: impl Into<String>) -> Self {
        Error::Numerical {
            message: message.into(),
            iterations: None,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
