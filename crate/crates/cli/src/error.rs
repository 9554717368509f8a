use std::path::PathBuf;

use sandbox_mfg::MfgError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error on {path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },

    #[error("numerical failure: {0}")]
    Numerical(MfgError),

    #[error(transparent)]
    Model(MfgError),
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit status for this failure class.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) => 2,
            Self::Io { .. } | Self::Csv { .. } => 3,
            Self::Numerical(_) => 4,
            Self::Model(_) => 1,
        }
    }
}

impl From<MfgError> for CliError {
    fn from(e: MfgError) -> Self {
        match e {
            MfgError::Diverged { .. }
            | MfgError::NonFinite(_)
            | MfgError::NoConvergence(_)
            | MfgError::InvariantViolated { .. } => Self::Numerical(e),
            MfgError::InvalidParameter(_) | MfgError::NetBudgetExceeded { .. } => {
                Self::Config(e.to_string())
            }
            other => Self::Model(other),
        }
    }
}
