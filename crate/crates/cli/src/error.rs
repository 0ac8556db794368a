use serde::Serialize;

/// A failure with its process exit code.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CliError {
    pub code: i32,
    pub kind: &'static str,
    pub message: String,
}

impl CliError {
    pub fn config(message: impl Into<String>) -> Self {
        Self {
            code: 2,
            kind: "config",
            message: message.into(),
        }
    }

    pub fn data(message: impl Into<String>) -> Self {
        Self {
            code: 3,
            kind: "data",
            message: message.into(),
        }
    }

    pub fn sampler(message: impl Into<String>) -> Self {
        Self {
            code: 4,
            kind: "sampler",
            message: message.into(),
        }
    }

    /// The machine-readable form written to stderr.
    pub fn to_json(&self) -> String {
        serde_json::json!({ "error": self }).to_string()
    }
}

impl From<cognoise::Error> for CliError {
    fn from(e: cognoise::Error) -> Self {
        use cognoise::Error as E;
        let message = e.to_string();
        match e {
            E::InvalidParameter(_) | E::DeterministicLimit | E::NotPositiveDefinite => CliError::config(message),
            E::NonFiniteGradient { .. } => CliError::sampler(message),
            _ => CliError::data(message),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
