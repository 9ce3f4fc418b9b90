use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid instance: {0}")]
    InvalidInstance(String),

    #[error("malformed assignment: {0}")]
    MalformedAssignment(String),

    #[error("infeasible plan: {0}")]
    Infeasible(String),

    #[error("routing oracle: {0}")]
    Routing(String),

    #[error("plans refer to different task universes ({0} vs {1})")]
    UniverseMismatch(usize, usize),

    #[error("empty task subset")]
    EmptySubset,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("solver: {0}")]
    Solver(String),

    #[error("degenerate statistics: {0}")]
    Degenerate(String),

    #[error("sample {index} failed: {source}")]
    Sample {
        index: usize,
        completed: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("digest mismatch: expected {expected}, found {found}")]
    DigestMismatch { expected: String, found: String },

    #[error("format: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
