use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {reason}")]
    Table { path: PathBuf, reason: String },

    #[error("missing {what} in {dir}; run `{stage}` first")]
    Missing {
        what: String,
        dir: PathBuf,
        stage: &'static str,
    },

    #[error("{stage} stage failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: koopman_core::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        use koopman_core::Error as E;
        match self {
            CliError::Config(_) => 2,
            CliError::Io { .. } | CliError::Table { .. } | CliError::Missing { .. } => 3,
            CliError::Stage { source, .. } => match source {
                E::InvalidParameter { .. } => 2,
                E::Io(_) | E::Parse { .. } | E::Format(_) | E::Metadata(_) => 3,
                _ => 4,
            },
        }
    }

    pub fn io(context: impl Into<String>) -> impl FnOnce(std::io::Error) -> CliError {
        let context = context.into();
        move |source| CliError::Io { context, source }
    }

    pub fn stage(stage: &'static str) -> impl FnOnce(koopman_core::Error) -> CliError {
        move |source| CliError::Stage { stage, source }
    }
}

pub type CliResult<T> = Result<T, CliError>;
