use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite {0}")]
    NonFinite(&'static str),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("archive is empty")]
    EmptyArchive,

    #[error("empty candidate set")]
    EmptyCandidates,

    #[error("empty sample")]
    EmptySample,

    #[error("{layer} layer has no elites after training")]
    EmptyLayer { layer: &'static str },

    #[error("cholesky factorization failed after jitter escalation")]
    Factorization,

    #[error("maze parse error at line {line}, column {column}: {msg}")]
    MazeParse {
        line: usize,
        column: usize,
        msg: String,
    },

    #[error("maze is not solvable: goal unreachable from start")]
    Unsolvable,

    #[error("repertoire file {path}: line {line}: {msg}")]
    Repertoire {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{0}")]
    Usage(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
