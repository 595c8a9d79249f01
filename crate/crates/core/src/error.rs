use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("point lies outside the admissible ball: |sigma| = {0}")]
    InvalidPoint(f64),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("non-finite value encountered: {0}")]
    NonFinite(String),
    #[error("functions live on different grids")]
    GridMismatch,
    #[error("degenerate grid: {0}")]
    DegenerateGrid(String),
    #[error("growth condition violated: {0}")]
    GrowthViolated(String),
    #[error("did not converge: {0}")]
    NotConverged(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    /// Process exit status associated with the error class.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::NotConverged(_) => 2,
            _ => 1,
        }
    }
}
