use thiserror::Error;

/// Errors surfaced by the library.
#[derive(Debug, Error)]
pub enum Error {
    /// An input vector or matrix has the wrong dimension.
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    /// A configuration value is out of its admissible range.
    #[error("configuration error: {0}")]
    Config(String),

    /// A binary payload does not follow the expected file format.
    #[error("format error: {0}")]
    Format(String),

    /// The requested operation is not available for this objective/method pair.
    #[error("unsupported: {0}")]
    Unsupported(String),

    /// An analysis precondition does not hold; the message names the violated inequality.
    #[error("constraint violated: {0}")]
    Constraint(String),

    /// A checker was invoked on inputs that break its contract.
    #[error("misuse: {0}")]
    Misuse(String),

    /// A numerical routine failed (singular system, non-finite intermediate).
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// A run-level invariant was violated during execution.
    #[error("invariant violated at round {round}: {message}")]
    Invariant { round: usize, message: String },

    /// A kernel failure, tagged with the round it happened in.
    #[error("round {round}: {source}")]
    AtRound {
        round: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn dims(expected: usize, actual: usize) -> Self {
        Error::DimensionMismatch { expected, actual }
    }

    pub(crate) fn at_round(round: usize, source: Error) -> Self {
        Error::AtRound {
            round,
            source: Box::new(source),
        }
    }
}
