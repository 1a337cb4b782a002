use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = CdnError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum CdnError {
    #[error("duplicate variable name `{0}`")]
    DuplicateName(String),

    #[error("unknown variable `{0}`")]
    UnknownVariable(String),

    #[error("function of arity {arity} cannot take a scope of {scope} variables")]
    ArityMismatch { arity: usize, scope: usize },

    #[error("function scope is invalid: {0}")]
    InvalidScope(String),

    #[error("domain mismatch: {0}")]
    DomainMismatch(String),

    #[error("invalid domain: {0}")]
    InvalidDomain(String),

    #[error("value outside the declared domain: {0}")]
    DomainError(String),

    #[error("invalid function parameters: {0}")]
    InvalidFunction(String),

    #[error("`{family}` has no closed-form limit for this reduction")]
    UnsupportedReduction { family: &'static str },

    #[error("message schedule error: {0}")]
    ScheduleError(String),

    #[error("function degree {0} exceeds the expansion limit")]
    DegreeTooLarge(usize),

    #[error("graph is not a tree (cycle through {cycle})")]
    NotATree { cycle: String },

    #[error("graph has no variables")]
    EmptyGraph,

    #[error("evidence has zero density under the model")]
    ZeroEvidenceDensity,

    #[error("differentiation subset of size {0} is too large")]
    SubsetTooLarge(usize),

    #[error("invalid query: {0}")]
    InvalidQuery(String),

    #[error("unknown player `{0}`")]
    UnknownPlayer(String),

    #[error("team of {0} players exceeds the supported size")]
    TeamTooLarge(usize),

    #[error("invalid match record: {0}")]
    InvalidMatch(String),

    #[error("invalid model parameters: {0}")]
    InvalidParams(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("{path}:{line}:{column}: {message}")]
    Parse {
        path: String,
        line: usize,
        column: usize,
        message: String,
    },

    #[error("record {index}: {message}")]
    Schema { index: usize, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CdnError {
    pub(crate) fn parse(line: usize, column: usize, message: impl Into<String>) -> Self {
        CdnError::Parse {
            path: String::from("<input>"),
            line,
            column,
            message: message.into(),
        }
    }

    /// Attaches a path to a parse error produced from in-memory text.
    pub fn with_path(self, path: impl Into<String>) -> Self {
        match self {
            CdnError::Parse {
                line,
                column,
                message,
                ..
            } => CdnError::Parse {
                path: path.into(),
                line,
                column,
                message,
            },
            other => other,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CdnError::Io {
            path: path.into(),
            source,
        }
    }
}
