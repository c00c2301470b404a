use std::fmt;
use std::process::ExitCode;

/// Failure of a subcommand, split by who has to act on it.
#[derive(Debug)]
pub enum CliError {
    /// Bad flags, config, or input files. Exit code 2.
    Input(String),
    /// Numerical failure or an output that could not be written. Exit code 1.
    Runtime(String),
}

impl CliError {
    pub fn input(msg: impl Into<String>) -> Self {
        CliError::Input(msg.into())
    }

    pub fn exit_code(&self) -> ExitCode {
        match self {
            CliError::Input(_) => ExitCode::from(2),
            CliError::Runtime(_) => ExitCode::from(1),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Input(m) | CliError::Runtime(m) => f.write_str(m),
        }
    }
}

impl From<specreg::Error> for CliError {
    fn from(e: specreg::Error) -> Self {
        let msg = match &e {
            specreg::Error::NonConvergence { best, .. } => format!("{e}; best parameters {best:?}"),
            _ => e.to_string(),
        };
        if e.is_input_error() {
            CliError::Input(msg)
        } else {
            CliError::Runtime(msg)
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
