use std::fmt;

use qfd_core::QfdError;

/// Failure classes, each with its own exit status.
#[derive(Debug)]
pub enum CliError {
    Parse(String),
    Validation { field: String, reason: String },
    Numerical(String),
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Parse(_) => 2,
            CliError::Validation { .. } => 3,
            CliError::Numerical(_) => 4,
            CliError::Io(_) => 5,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Parse(m) => write!(f, "config parse error: {m}"),
            CliError::Validation { field, reason } => write!(f, "invalid config: {field}: {reason}"),
            CliError::Numerical(m) => write!(f, "numerical abort: {m}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
        }
    }
}

impl From<QfdError> for CliError {
    fn from(e: QfdError) -> Self {
        match e {
            QfdError::InvalidParameter { name, reason } => CliError::Validation { field: name, reason },
            QfdError::Io(e) => CliError::Io(e.to_string()),
            QfdError::Format { .. } => CliError::Io(e.to_string()),
            other => CliError::Numerical(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}
