use std::process::ExitCode;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad arguments or unreadable input.
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Compute(#[from] anglerank::Error),
}

impl CliError {
    pub fn usage(msg: impl Into<String>) -> Self {
        Self::Usage(msg.into())
    }

    pub fn exit_code(&self) -> ExitCode {
        match self {
            Self::Usage(_) => ExitCode::from(1),
            Self::Compute(_) => ExitCode::from(2),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
