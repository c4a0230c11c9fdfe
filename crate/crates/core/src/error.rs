use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    #[error("line {line}: {message}")]
    Format { line: usize, message: String },

    #[error("invalid type path {path:?}: {reason}")]
    TypePath { path: String, reason: &'static str },

    #[error("duplicate mid {0}")]
    DuplicateMid(String),

    #[error("domain merge map is cyclic: {0} is both a source and a destination")]
    CyclicMerge(String),

    #[error("unknown mid {0}")]
    UnknownMid(String),

    #[error("entity {0} has no declared types")]
    Unresolvable(String),

    #[error("surface form must contain at least one token")]
    EmptySurface,

    #[error("cannot score empty text")]
    EmptyText,

    #[error("unknown coarse label {0:?}")]
    UnknownLabel(String),

    #[error("duplicate mapping for {0}")]
    DuplicateMapping(String),

    #[error("fine type {0} is neither mapped nor in an eliminated domain")]
    UncoveredType(String),

    #[error("sentence {0} has no domain")]
    MissingDomain(usize),

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("invalid IOB sequence at token {0}")]
    InvalidIob(usize),

    #[error("unknown annotator {0:?}")]
    UnknownAnnotator(String),

    #[error("unknown task {0}")]
    UnknownTask(u64),

    #[error("unknown span {span} in {sentence}")]
    UnknownSpan { sentence: String, span: usize },

    #[error("rejected verdict: {0}")]
    InvalidVerdict(String),

    #[error("{0}")]
    Invalid(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn format(line: usize, message: impl Into<String>) -> Self {
        Error::Format { line, message: message.into() }
    }

    /// True for errors caused by malformed or missing input rather than by a
    /// bug or an environment failure.
    pub fn is_input(&self) -> bool {
        match self {
            Error::Io { source, .. } => source.kind() == io::ErrorKind::NotFound,
            _ => true,
        }
    }
}
