//! Failure classes and their exit codes.

use std::fmt;

#[derive(Debug)]
pub enum CliError {
    /// Bad flags or configuration: exit 1.
    User(String),
    /// Unreadable or inconsistent input files: exit 2.
    Data(String),
    /// A checked invariant of the pipeline failed: exit 3.
    Internal(String),
}

impl CliError {
    pub fn user(msg: impl Into<String>) -> Self {
        CliError::User(msg.into())
    }

    pub fn data(msg: impl Into<String>) -> Self {
        CliError::Data(msg.into())
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::User(_) => 1,
            CliError::Data(_) => 2,
            CliError::Internal(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::User(m) => write!(f, "error: {m}"),
            CliError::Data(m) => write!(f, "data error: {m}"),
            CliError::Internal(m) => write!(f, "internal error: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<zcfuse::Error> for CliError {
    fn from(e: zcfuse::Error) -> Self {
        use zcfuse::Error as E;
        match e {
            E::Parameter(_) | E::Config(_) => CliError::User(e.to_string()),
            E::Format(_) | E::Io { .. } => CliError::Data(e.to_string()),
            E::Diagnostic(_) => CliError::Internal(e.to_string()),
        }
    }
}
