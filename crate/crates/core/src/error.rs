use thiserror::Error;

use crate::config::ConfigError;
use crate::decomposition::DecompositionError;
use crate::kernel::KernelError;
use crate::operator::OperatorError;
use crate::schedule::ScheduleError;
use crate::schmidt::SchmidtError;
use crate::wavelet::WaveletError;

/// Crate-level error. Each stage keeps its own error enum; this one only
/// routes them so the pipeline and the CLI can classify failures.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Wavelet(#[from] WaveletError),
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
    #[error(transparent)]
    Operator(#[from] OperatorError),
    #[error(transparent)]
    Decomposition(#[from] DecompositionError),
    #[error(transparent)]
    Schmidt(#[from] SchmidtError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Configuration problems (unreadable or malformed input) as opposed to
    /// failures of the construction itself.
    pub fn is_config(&self) -> bool {
        match self {
            Error::Config(_) => true,
            Error::Operator(e) => e.is_input_error(),
            _ => false,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
