use std::path::PathBuf;

use thiserror::Error;

use crate::schema::{EntityType, Relation};

pub type Result<T, E = DremError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum DremError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {message}")]
    Parse { path: PathBuf, line: usize, message: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("empty corpus: {0}")]
    EmptyCorpus(&'static str),

    #[error("unknown {kind} id {id}")]
    UnknownId { kind: EntityType, id: u32 },

    #[error("relation {relation} does not start at entity type {found}")]
    TypeMismatch { relation: Relation, found: EntityType },

    #[error("empty query")]
    EmptyQuery,

    #[error("tail {0} is not in the candidate set")]
    TailNotInCandidates(u32),

    #[error("relation {0} has no observed tails")]
    EmptyNoiseTable(Relation),

    #[error("non-finite parameter in {block} after step {step}")]
    NonFinite { block: String, step: usize },

    #[error("model file: {0}")]
    Format(String),

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
}

impl DremError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        DremError::Io { path: path.into(), source }
    }

    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            DremError::NonFinite { .. } => 3,
            _ => 2,
        }
    }
}
