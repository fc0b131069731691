use crate::eval::ScoringError;
use crate::format::MalformedArchive;
use crate::sandbox::SandboxError;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{kind} {id} not found")]
    NotFound { kind: &'static str, id: String },
    #[error("{kind} {id} already exists")]
    Duplicate { kind: &'static str, id: String },
    #[error("problem {0} not judgeable")]
    NotJudgeable(String),
    #[error("single attempt exhausted for problem {0}")]
    AttemptExhausted(String),
    #[error("forbidden: {0}")]
    Forbidden(String),
    #[error("invalid request: {0}")]
    Invalid(String),
    #[error("bad credentials")]
    BadCredentials,
    #[error(transparent)]
    Malformed(#[from] MalformedArchive),
    #[error("submission {0} already has a terminal verdict")]
    AlreadyTerminal(String),
    #[error("journal corrupt at line {line}: {message}")]
    Corrupt { line: usize, message: String },
    #[error("problem {pid} is ambiguous: canonical solutions disagree")]
    Ambiguous { pid: String, disagreements: usize },
    #[error("inconclusive: {0}")]
    Inconclusive(String),
    #[error(transparent)]
    Scoring(#[from] ScoringError),
    #[error(transparent)]
    Sandbox(#[from] SandboxError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn not_found(kind: &'static str, id: impl Into<String>) -> Self {
        Error::NotFound { kind, id: id.into() }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
