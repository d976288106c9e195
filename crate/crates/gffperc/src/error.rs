use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unsupported dimension {d}: {reason}")]
    Dimension { d: usize, reason: String },
    #[error("geometry: {0}")]
    Geometry(String),
    #[error("precondition: {0}")]
    Precondition(String),
    #[error("requested accuracy {requested:e} not reached (achieved {achieved:e})")]
    Accuracy { requested: f64, achieved: f64 },
    #[error("numerical failure: {0}")]
    Numeric(String),
    #[error("set of {size} vertices exceeds the exact-solve limit {limit}; use the Monte Carlo estimator")]
    Size { size: usize, limit: usize },
    #[error("invariant violated: {0}")]
    Invariant(String),
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn geometry(msg: impl Into<String>) -> Self {
        Error::Geometry(msg.into())
    }

    pub fn precondition(msg: impl Into<String>) -> Self {
        Error::Precondition(msg.into())
    }

    pub fn numeric(msg: impl Into<String>) -> Self {
        Error::Numeric(msg.into())
    }

    /// Process exit code: 2 for bad input, 3 for numerical failure, 4 for a broken invariant.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Dimension { .. }
            | Error::Geometry(_)
            | Error::Precondition(_)
            | Error::Config(_) => 2,
            Error::Accuracy { .. } | Error::Numeric(_) | Error::Size { .. } => 3,
            Error::Invariant(_) => 4,
            Error::Io(_) | Error::Json(_) => 3,
        }
    }
}
