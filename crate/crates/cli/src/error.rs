//! Errors surfaced by the command line, with their exit codes.

use serde::Serialize;

/// Exit status for malformed input or a violated precondition.
pub const EXIT_VALIDATION: i32 = 1;
/// Exit status for a numerical failure at runtime.
pub const EXIT_NUMERICAL: i32 = 2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ErrorKind {
    Validation,
    Numerical,
    Io,
}

/// The structured error written to `error.json` and standard error.
#[derive(Clone, Debug, Serialize)]
pub struct CliError {
    pub kind: ErrorKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub field: Option<String>,
    pub message: String,
}

impl CliError {
    pub fn validation(field: impl Into<String>, message: impl Into<String>) -> Self {
        CliError { kind: ErrorKind::Validation, field: Some(field.into()), message: message.into() }
    }

    pub fn missing(field: &str, command: &str) -> Self {
        Self::validation(field, format!("`{field}` is required by `{command}`"))
    }

    pub fn exit_code(&self) -> i32 {
        match self.kind {
            ErrorKind::Numerical => EXIT_NUMERICAL,
            ErrorKind::Validation | ErrorKind::Io => EXIT_VALIDATION,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match &self.field {
            Some(field) => write!(f, "{field}: {}", self.message),
            None => f.write_str(&self.message),
        }
    }
}

impl From<roughwalk::Error> for CliError {
    fn from(e: roughwalk::Error) -> Self {
        let kind = if e.is_numerical() {
            ErrorKind::Numerical
        } else if matches!(e, roughwalk::Error::Io(_)) {
            ErrorKind::Io
        } else {
            ErrorKind::Validation
        };
        let field = match &e {
            roughwalk::Error::InvalidParameter { name, .. } => Some(name.to_string()),
            _ => None,
        };
        CliError { kind, field, message: e.to_string() }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError { kind: ErrorKind::Io, field: None, message: e.to_string() }
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError { kind: ErrorKind::Io, field: None, message: e.to_string() }
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError { kind: ErrorKind::Io, field: None, message: e.to_string() }
    }
}

pub type CliResult<T> = Result<T, CliError>;
