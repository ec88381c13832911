use std::path::PathBuf;

use thiserror::Error;

use crate::consistency::ConsistencyError;
use crate::eval::EvalError;
use crate::microscope::MicroscopeError;
use crate::residual::ResidualError;
use crate::sampling::SamplingError;
use crate::sentinel::SentinelError;
use crate::synthgen::SynthError;

/// Crate-level error. Every variant carries the module it came from so the
/// command line can report `module.kind` codes.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Sampling(#[from] SamplingError),
    #[error(transparent)]
    Residual(#[from] ResidualError),
    #[error(transparent)]
    Consistency(#[from] ConsistencyError),
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error(transparent)]
    Sentinel(#[from] SentinelError),
    #[error(transparent)]
    Microscope(#[from] MicroscopeError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}: {source}", path.display())]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn json(path: impl Into<PathBuf>, source: serde_json::Error) -> Self {
        Error::Json {
            path: path.into(),
            source,
        }
    }

    /// Module-qualified error code, e.g. `sampling.dimension_mismatch`.
    pub fn code(&self) -> String {
        match self {
            Error::Sampling(e) => format!("sampling.{}", e.kind()),
            Error::Residual(e) => format!("residual.{}", e.kind()),
            Error::Consistency(e) => format!("consistency.{}", e.kind()),
            Error::Synth(e) => format!("synthgen.{}", e.kind()),
            Error::Sentinel(e) => format!("sentinel.{}", e.kind()),
            Error::Microscope(e) => format!("microscope.{}", e.kind()),
            Error::Eval(e) => format!("eval.{}", e.kind()),
            Error::Config(_) => "cli.config".to_string(),
            Error::Io { .. } => "cli.io".to_string(),
            Error::Json { .. } => "cli.json".to_string(),
        }
    }

    /// Process exit status: 3 for configuration problems, 2 for everything
    /// else that stops a run.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 3,
            _ => 2,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
