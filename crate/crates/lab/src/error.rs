use std::path::PathBuf;

use mnm_core::MnmError;
use thiserror::Error;

/// Process exit status for a successful run.
pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_BOUND_FAILURE: i32 = 2;
pub const EXIT_DIVERGENCE: i32 = 3;

#[derive(Debug, Error)]
pub enum LabError {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("cannot parse {}: {source}", path.display())]
    Parse {
        path: PathBuf,
        #[source]
        source: toml::de::Error,
    },

    #[error("i/o error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv output failed: {0}")]
    Csv(#[from] csv::Error),

    #[error("{experiment} / {method} / seed {seed}: {source}")]
    Run {
        experiment: String,
        method: String,
        seed: u64,
        #[source]
        source: MnmError,
    },

    #[error(transparent)]
    Core(#[from] MnmError),
}

pub type Result<T> = std::result::Result<T, LabError>;

impl LabError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        LabError::Io {
            path: path.into(),
            source,
        }
    }

    /// Exit status for this error: configuration problems map to 1 and
    /// numerical failures inside a solver map to 3.
    pub fn exit_code(&self) -> i32 {
        let core = match self {
            LabError::Run { source, .. } | LabError::Core(source) => source,
            _ => return EXIT_CONFIG,
        };
        match core {
            MnmError::InvalidConfig(_)
            | MnmError::InvalidArgument(_)
            | MnmError::InvalidMdp(_)
            | MnmError::DimensionMismatch(_) => EXIT_CONFIG,
            _ => EXIT_DIVERGENCE,
        }
    }
}
