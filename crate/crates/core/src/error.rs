use std::path::PathBuf;

use crate::genkit::GenerationRecord;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("failed to read {path}: {source}")]
    Load {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed JSON in {path} at line {line}, column {column}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        column: usize,
        message: String,
    },

    #[error("schema error: {0}")]
    Schema(String),

    #[error("consistency error: {0}")]
    Consistency(String),

    #[error("template error: {0}")]
    Template(String),

    #[error("generation failed for {intent} after {attempts} attempts ({} partial records): {message}", partial.len())]
    Generation {
        intent: String,
        attempts: usize,
        message: String,
        partial: Vec<GenerationRecord>,
    },

    #[error("capability error: {0}")]
    Capability(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("backend `{backend}` failed: {message}")]
    Backend { backend: String, message: String },

    #[error("usage error: {0}")]
    Usage(String),

    #[error("missing dependency: {0}")]
    Dependency(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn backend(backend: impl Into<String>, message: impl ToString) -> Self {
        Error::Backend {
            backend: backend.into(),
            message: message.to_string(),
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, err: &serde_json::Error) -> Self {
        Error::Parse {
            path: path.into(),
            line: err.line(),
            column: err.column(),
            message: err.to_string(),
        }
    }

    /// Process exit code for the CLI: 1 usage, 2 dependency missing, 3 backend failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Usage(_) | Error::Argument(_) => 1,
            Error::Dependency(_) => 2,
            Error::Backend { .. } | Error::Generation { .. } | Error::Capability(_) => 3,
            _ => 1,
        }
    }
}
