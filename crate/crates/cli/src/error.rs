use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config parse error: {0}")]
    Parse(#[source] serde_json::Error),
    #[error("invalid config field `{field}`: {message}")]
    Field { field: String, message: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("csv error in {path}: {message}")]
    Csv { path: PathBuf, message: String },
    #[error("schema error: {0}")]
    Schema(String),
    #[error("{error}\nhint: {hint}")]
    Hinted {
        error: stula_core::Error,
        hint: &'static str,
    },
    #[error(transparent)]
    Core(stula_core::Error),
}

pub type CliResult<T> = std::result::Result<T, CliError>;

impl CliError {
    pub fn field(field: impl Into<String>, message: impl Into<String>) -> Self {
        CliError::Field {
            field: field.into(),
            message: message.into(),
        }
    }

    /// Attaches remediation hints to the errors users can act on.
    pub fn from_core(e: stula_core::Error) -> Self {
        use stula_core::Error as E;
        match e {
            E::StepsizeTooLarge { .. } => CliError::Field {
                field: "lambda".into(),
                message: format!("{e} (config key `allow_large_step`)"),
            },
            E::InvalidParameter { name, .. } => CliError::Field {
                field: name.into(),
                message: e.to_string(),
            },
            E::Diverged { .. } => CliError::Hinted {
                error: e,
                hint: "every chain left the finite region; use scheme \"stula\" or a smaller lambda",
            },
            E::BoxTooSmall { .. } => CliError::Hinted {
                error: e,
                hint: "adjust `grid.lower` / `grid.upper` in the config",
            },
            other => CliError::Core(other),
        }
    }

    /// Reports a field error under another field name.
    pub fn rename(self, field: &str) -> Self {
        match self {
            CliError::Field { field: inner, message } => CliError::Field {
                field: field.into(),
                message: format!("{inner}: {message}"),
            },
            other => other,
        }
    }
}

impl From<stula_core::Error> for CliError {
    fn from(e: stula_core::Error) -> Self {
        CliError::from_core(e)
    }
}
