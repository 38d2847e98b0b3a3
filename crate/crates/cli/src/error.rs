use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("{0}")]
    NonConvergence(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data(_) | CliError::Io { .. } => 3,
            CliError::NonConvergence(_) => 4,
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    /// Tags a core error raised while validating configuration.
    pub fn in_section(section: &str, err: qdot_core::Error) -> Self {
        match err {
            qdot_core::Error::InvalidParameter { .. } | qdot_core::Error::UnknownMaterial(_) => {
                CliError::Config(format!("[{section}] {err}"))
            }
            other => other.into(),
        }
    }
}

impl From<qdot_core::Error> for CliError {
    fn from(err: qdot_core::Error) -> Self {
        use qdot_core::Error as E;
        match err {
            E::InvalidParameter { .. } | E::UnknownMaterial(_) => CliError::Config(err.to_string()),
            E::NonConvergence { .. } => CliError::NonConvergence(err.to_string()),
            E::Domain(_) | E::Data(_) | E::Degenerate(_) | E::NoDip(_) | E::Io(_) | E::Csv(_) => {
                CliError::Data(err.to_string())
            }
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
