use std::path::Path;

use hdnf_core::deployment::{DeploymentError, TrainingFault};
use hdnf_core::pipeline::PipelineError;
use hdnf_core::scenario::ConfigError;
use hdnf_core::tasking::TaskingError;
use thiserror::Error;

/// Failure classes, one per process exit code.
#[derive(Debug, Error)]
pub enum Error {
    #[error("infeasible: {0}")]
    Infeasible(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("runtime fault: {0}")]
    Runtime(String),
}

impl Error {
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Infeasible(_) => 1,
            Error::Config(_) => 2,
            Error::Runtime(_) => 3,
        }
    }

    /// Short tag used in result rows.
    pub fn status(&self) -> &'static str {
        match self {
            Error::Infeasible(_) => "infeasible",
            Error::Config(_) => "config_error",
            Error::Runtime(_) => "runtime_fault",
        }
    }

    pub fn io(path: &Path, e: std::io::Error) -> Self {
        Error::Runtime(format!("{}: {e}", path.display()))
    }

    /// Same class, message prefixed with the file it concerns.
    pub fn in_file(self, path: &Path) -> Self {
        let p = path.display();
        match self {
            Error::Infeasible(m) => Error::Infeasible(format!("{p}: {m}")),
            Error::Config(m) => Error::Config(format!("{p}: {m}")),
            Error::Runtime(m) => Error::Runtime(format!("{p}: {m}")),
        }
    }

    /// Unreadable input files are the caller's mistake, not a fault.
    pub fn input(path: &Path, e: impl std::fmt::Display) -> Self {
        Error::Config(format!("{}: {e}", path.display()))
    }
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<ConfigError> for Error {
    fn from(e: ConfigError) -> Self {
        Error::Config(e.to_string())
    }
}

impl From<TaskingError> for Error {
    fn from(e: TaskingError) -> Self {
        Error::Infeasible(e.to_string())
    }
}

impl From<TrainingFault> for Error {
    fn from(e: TrainingFault) -> Self {
        match e {
            TrainingFault::InvalidConfig(m) => Error::Config(m.to_string()),
            e => Error::Runtime(e.to_string()),
        }
    }
}

impl From<DeploymentError> for Error {
    fn from(e: DeploymentError) -> Self {
        match e {
            DeploymentError::Rollout(f) => f.into(),
            e => Error::Runtime(e.to_string()),
        }
    }
}

impl From<PipelineError> for Error {
    fn from(e: PipelineError) -> Self {
        match e {
            PipelineError::Infeasible(t) => t.into(),
            PipelineError::Config(m) => Error::Config(m),
            PipelineError::Deployment(d) => d.into(),
        }
    }
}
