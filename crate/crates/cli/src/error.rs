use std::fmt;

use serde::Serialize;
use trackhhl::error::ErrorKind;

/// Failure reported on stderr as one JSON object; the kind picks the exit
/// status.
#[derive(Debug, Serialize)]
pub struct CliError {
    pub kind: &'static str,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub context: Option<String>,
}

impl CliError {
    pub fn config(message: impl Into<String>) -> Self {
        CliError {
            kind: "config",
            message: message.into(),
            context: None,
        }
    }

    pub fn data(message: impl Into<String>) -> Self {
        CliError {
            kind: "data",
            message: message.into(),
            context: None,
        }
    }

    pub fn with_context(mut self, context: impl Into<String>) -> Self {
        self.context = Some(context.into());
        self
    }

    pub fn exit_code(&self) -> u8 {
        match self.kind {
            "config" => 2,
            "data" => 3,
            _ => 4,
        }
    }
}

impl From<trackhhl::Error> for CliError {
    fn from(e: trackhhl::Error) -> Self {
        let kind = match e.kind() {
            ErrorKind::Config => "config",
            ErrorKind::Data => "data",
            ErrorKind::Numerical => "numerical",
        };
        CliError {
            kind,
            message: e.to_string(),
            context: None,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::data(e.to_string())
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", serde_json::json!({ "error": self }))
    }
}
