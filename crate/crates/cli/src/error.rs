use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },

    #[error("cannot write {path}: {source}")]
    Write { path: PathBuf, source: std::io::Error },

    #[error(transparent)]
    Core(#[from] pmentropy::Error),
}

pub type Result<T> = std::result::Result<T, CliError>;

impl CliError {
    pub fn exit_code(&self) -> u8 {
        use pmentropy::Error as E;
        match self {
            CliError::Usage(_) => 2,
            CliError::Read { .. } | CliError::Write { .. } => 5,
            CliError::Core(E::Infeasible(_)) => 3,
            CliError::Core(E::CapExceeded { .. }) => 4,
            CliError::Core(E::Numerical(_)) => 1,
            CliError::Core(_) => 2,
        }
    }

    pub fn kind(&self) -> &'static str {
        use pmentropy::Error as E;
        match self {
            CliError::Usage(_) => "usage",
            CliError::Read { .. } | CliError::Write { .. } => "io",
            CliError::Core(E::Infeasible(_)) => "infeasible",
            CliError::Core(E::CapExceeded { .. }) => "cap_exceeded",
            CliError::Core(E::Numerical(_)) => "numerical",
            CliError::Core(E::Parse(_) | E::Json(_)) => "parse",
            CliError::Core(_) => "invalid_input",
        }
    }

    /// The single diagnostic line written to stderr.
    pub fn to_line(&self) -> String {
        serde_json::json!({
            "error": self.kind(),
            "exit_code": self.exit_code(),
            "message": self.to_string(),
        })
        .to_string()
    }
}
