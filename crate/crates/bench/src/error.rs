use thiserror::Error;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] nfbeam::Error),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("manifest error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("plot error: {0}")]
    Plot(String),
}

pub type BenchResult<T> = std::result::Result<T, BenchError>;

impl BenchError {
    /// 2 for configuration problems, 3 for numeric failures, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            BenchError::Config(_) => 2,
            BenchError::Core(nfbeam::Error::Config(_) | nfbeam::Error::Domain(_) | nfbeam::Error::Dimension { .. }) => 2,
            BenchError::Core(nfbeam::Error::Numeric(_)) => 3,
            _ => 1,
        }
    }
}
