use std::path::Path;

use mtrank_core::ingest::IngestError;
use mtrank_core::metaeval::MetaEvalError;
use mtrank_core::pairgen::PairGenError;
use mtrank_core::perturb::PerturbError;
use mtrank_core::provider::ProviderError;
use mtrank_core::ranker::train::TrainError;
use mtrank_core::ranker::ModelError;
use mtrank_core::sysrank::SysRankError;
use mtrank_core::types::TypeError;
use thiserror::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 1;
pub const EXIT_PROVIDER_IO: i32 = 2;
pub const EXIT_USAGE: i32 = 64;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Validation(String),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("provider error: {0}")]
    Provider(#[from] ProviderError),
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.display().to_string(),
            source,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Validation(_) => EXIT_VALIDATION,
            CliError::Io { .. } | CliError::Provider(_) => EXIT_PROVIDER_IO,
        }
    }
}

pub fn in_file(path: &Path, e: IngestError) -> CliError {
    match e {
        IngestError::Io(msg) => CliError::io(path, std::io::Error::other(msg)),
        other => CliError::Validation(format!("{}: {other}", path.display())),
    }
}

macro_rules! validation {
    ($($t:ty),*) => {$(
        impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                CliError::Validation(e.to_string())
            }
        }
    )*};
}

validation!(TypeError, MetaEvalError, TrainError, ModelError);

impl From<PairGenError> for CliError {
    fn from(e: PairGenError) -> Self {
        match e {
            PairGenError::Provider(p) => CliError::Provider(p),
            other => CliError::Validation(other.to_string()),
        }
    }
}

impl From<PerturbError> for CliError {
    fn from(e: PerturbError) -> Self {
        match e {
            PerturbError::Provider(p) => CliError::Provider(p),
            other => CliError::Validation(other.to_string()),
        }
    }
}

impl From<SysRankError> for CliError {
    fn from(e: SysRankError) -> Self {
        match e {
            SysRankError::Provider(p) => CliError::Provider(p),
            other => CliError::Validation(other.to_string()),
        }
    }
}
