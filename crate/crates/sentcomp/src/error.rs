use std::path::PathBuf;

use sentcomp_core::analysis::{BucketError, SignificanceError};
use sentcomp_core::corpus::CorpusError;
use sentcomp_core::metrics::MetricError;
use sentcomp_core::postprocess::ExtractionError;
use sentcomp_core::templating::TemplateError;

use crate::backend::BackendError;

/// Process exit codes of the command line tool.
pub mod exit {
    pub const OK: i32 = 0;
    pub const VALIDATION: i32 = 1;
    pub const BACKEND: i32 = 2;
    pub const SCORING: i32 = 3;
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{}: {source}", path.display())]
    Corpus { path: PathBuf, source: CorpusError },
    #[error("{}:{line}: {message}", path.display())]
    Parse { path: PathBuf, line: usize, message: String },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Template(#[from] TemplateError),
    #[error(transparent)]
    Extraction(#[from] ExtractionError),
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error("{count} example(s) failed; first: {first}")]
    Batch { count: usize, first: String },
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Bucket(#[from] BucketError),
    #[error(transparent)]
    Significance(#[from] SignificanceError),
    #[error("reports do not cover the same examples: {0}")]
    MismatchedCorpora(String),
    #[error("{0}")]
    Report(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io { .. }
            | Error::Corpus { .. }
            | Error::Parse { .. }
            | Error::Config(_)
            | Error::Template(_)
            | Error::Extraction(_) => exit::VALIDATION,
            Error::Backend(_) | Error::Batch { .. } => exit::BACKEND,
            Error::Metric(_)
            | Error::Bucket(_)
            | Error::Significance(_)
            | Error::MismatchedCorpora(_)
            | Error::Report(_) => exit::SCORING,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
