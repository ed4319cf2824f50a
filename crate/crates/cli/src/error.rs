use std::path::Path;

/// Failure of a command, carrying its process exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("i/o error: {0}")]
    Io(String),
    #[error("runtime failure: {0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Invalid(_) => 1,
            CliError::Io(_) => 2,
            CliError::Runtime(_) => 3,
        }
    }

    pub(crate) fn io(path: &Path, err: std::io::Error) -> Self {
        CliError::Io(format!("{}: {err}", path.display()))
    }

    /// Core errors raised while optimising are runtime failures; everything else
    /// the core rejects is bad input.
    pub(crate) fn training(err: headmotion::Error) -> Self {
        match err {
            headmotion::Error::Training(m) => CliError::Runtime(m),
            other => CliError::Runtime(other.to_string()),
        }
    }
}

impl From<headmotion::Error> for CliError {
    fn from(err: headmotion::Error) -> Self {
        match err {
            headmotion::Error::Training(m) => CliError::Runtime(m),
            other => CliError::Invalid(other.to_string()),
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
