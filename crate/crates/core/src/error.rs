use std::path::{Path, PathBuf};

use crate::app::Violation;
use crate::dist::DistError;
use crate::trace::{ContextId, RecordError};

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("unknown benchmark `{0}`")]
    UnknownBenchmark(String),
    #[error("invalid application: {}", join(.0))]
    InvalidApplication(Vec<Violation>),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("function `{0}` is not assigned to any platform")]
    UnassignedFunction(String),
    #[error("unknown platform `{0}`")]
    UnknownPlatform(String),
    #[error("no binding for external service `{0}`")]
    MissingServiceBinding(String),
    #[error("adapter for platform `{platform}` failed: {cause}")]
    AdapterFailure { platform: String, cause: String },
    #[error("function `{0}` is not deployed on this platform")]
    NotDeployed(String),
    #[error("function `{0}` is not event-triggered")]
    NotAsync(String),
    #[error("unknown endpoint `{0}`")]
    UnknownEndpoint(String),
    #[error("no binding for service `{0}`")]
    NoServiceBinding(String),
    #[error("unsupported log schema version: {0}")]
    UnsupportedSchemaVersion(String),
    #[error("call tree for context {0} is incomplete")]
    IncompleteTree(ContextId),
    #[error("{found} malformed log lines, at most {allowed} allowed")]
    TooManyParseErrors { found: usize, allowed: usize },
    #[error("unknown recipe `{0}`")]
    UnknownRecipe(String),
    #[error(transparent)]
    Record(#[from] RecordError),
    #[error(transparent)]
    Dist(#[from] DistError),
}

impl Error {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        Error::Io { path: path.to_path_buf(), source }
    }
}

fn join(violations: &[Violation]) -> String {
    violations.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; ")
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
