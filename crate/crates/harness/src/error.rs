use std::io;
use std::path::PathBuf;

use backtrans_core::backend::BackendError;
use backtrans_core::buffer::BufferError;
use backtrans_core::optim::OptimError;
use backtrans_core::rollout::RolloutError;
use backtrans_core::similarity::SimilarityError;
use backtrans_core::toyworld::ToyError;

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Format {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error(transparent)]
    Similarity(#[from] SimilarityError),
    #[error(transparent)]
    Buffer(#[from] BufferError),
    #[error(transparent)]
    Optim(#[from] OptimError),
    #[error(transparent)]
    Toy(ToyError),
    #[error(transparent)]
    Rollout(RolloutError),
}

impl HarnessError {
    pub fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Self::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code: 1 domain, 2 usage, 3 backend.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Usage(_) => 2,
            Self::Backend(_) | Self::Rollout(RolloutError::Backend(_)) => 3,
            Self::Toy(ToyError::Rollout(RolloutError::Backend(_))) => 3,
            _ => 1,
        }
    }
}

impl From<RolloutError> for HarnessError {
    fn from(e: RolloutError) -> Self {
        match e {
            RolloutError::Backend(b) => Self::Backend(b),
            other => Self::Rollout(other),
        }
    }
}

impl From<ToyError> for HarnessError {
    fn from(e: ToyError) -> Self {
        Self::Toy(e)
    }
}
