use std::path::PathBuf;

use thiserror::Error;

/// Process exit codes.
pub mod exit {
    pub const OK: i32 = 0;
    pub const USAGE: i32 = 1;
    pub const INFEASIBLE: i32 = 2;
    pub const PARSE_IO: i32 = 3;
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("{0}")]
    Core(#[from] hinf_core::Error),
    /// Analysis did not certify the gains; the summary is already printed.
    #[error("not certified: margin {margin:e}")]
    Uncertified { margin: f64 },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        use hinf_core::Error as E;
        match self {
            CliError::Usage(_) => exit::USAGE,
            CliError::Io { .. } | CliError::Parse { .. } => exit::PARSE_IO,
            CliError::Uncertified { .. } => exit::INFEASIBLE,
            CliError::Core(e) => match e {
                E::ParameterDomain(_) | E::DelayContract { .. } | E::Dimension(_) => exit::USAGE,
                _ => exit::INFEASIBLE,
            },
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn parse(path: impl Into<PathBuf>, message: impl ToString) -> Self {
        CliError::Parse {
            path: path.into(),
            message: message.to_string(),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
