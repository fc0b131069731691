//! Domain types shared by the store, the judge and the scoring layer.

use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::score::Score;

pub type Pid = String;
pub type Uid = String;
pub type Sid = String;
pub type CaseId = String;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Difficulty {
    Easy,
    Medium,
    Hard,
    Unknown,
}

impl Difficulty {
    /// Lenient: anything unrecognised is `Unknown`.
    pub fn from_label(label: &str) -> Self {
        match label.trim().to_ascii_lowercase().as_str() {
            "easy" => Difficulty::Easy,
            "medium" => Difficulty::Medium,
            "hard" => Difficulty::Hard,
            _ => Difficulty::Unknown,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProblemStatus {
    Draft,
    Active,
    Ambiguous,
    Retired,
}

impl ProblemStatus {
    /// Only active problems accept submissions.
    pub fn is_judgeable(self) -> bool {
        self == ProblemStatus::Active
    }

    /// Whether solutions on a problem in this status count toward dynamic points.
    pub fn counts_for_scoring(self) -> bool {
        matches!(self, ProblemStatus::Active)
    }
}

impl FromStr for ProblemStatus {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "draft" => Ok(ProblemStatus::Draft),
            "active" => Ok(ProblemStatus::Active),
            "ambiguous" => Ok(ProblemStatus::Ambiguous),
            "retired" => Ok(ProblemStatus::Retired),
            other => Err(format!("unknown problem status {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CanonicalSolution {
    pub language: String,
    pub source: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Problem {
    pub pid: Pid,
    pub title: String,
    pub statement: String,
    /// Basic problem score.
    pub bps: Score,
    pub difficulty: Difficulty,
    pub cpu_limit_ms: u64,
    pub memory_limit_kib: u64,
    pub canonical_solutions: Vec<CanonicalSolution>,
    pub status: ProblemStatus,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Provenance {
    Imported,
    Generated { seed: u64 },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestCase {
    pub case_id: CaseId,
    pub pid: Pid,
    #[serde(with = "crate::bytes_b64")]
    pub input: Vec<u8>,
    #[serde(with = "crate::bytes_b64")]
    pub expected_output: Vec<u8>,
    pub provenance: Provenance,
    pub position: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UserGroup {
    Curator,
    Generator,
    Reader,
}

impl FromStr for UserGroup {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "curator" => Ok(UserGroup::Curator),
            "generator" => Ok(UserGroup::Generator),
            "reader" => Ok(UserGroup::Reader),
            other => Err(format!("unknown user group {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GeneratorKind {
    Machine,
    Human,
    None,
}

impl FromStr for GeneratorKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "machine" => Ok(GeneratorKind::Machine),
            "human" => Ok(GeneratorKind::Human),
            "none" => Ok(GeneratorKind::None),
            other => Err(format!("unknown generator kind {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AttemptPolicy {
    Single,
    Unlimited,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UserAccount {
    pub uid: Uid,
    pub name: String,
    pub group: UserGroup,
    pub generator_kind: GeneratorKind,
    /// Hex SHA-256 of the active API token, if one has been issued.
    pub token_hash: Option<String>,
    pub attempt_policy: AttemptPolicy,
    /// `salt$hex(sha256(salt || password))`.
    pub password_hash: String,
    /// Generator backend used to resolve prompt-mode submissions.
    pub backend: Option<String>,
}

impl UserAccount {
    /// Attempt policy follows from group and kind: machine generators get one
    /// attempt per problem, everybody else is unlimited.
    pub fn policy_for(group: UserGroup, kind: GeneratorKind) -> AttemptPolicy {
        if group == UserGroup::Generator && kind == GeneratorKind::Machine {
            AttemptPolicy::Single
        } else {
            AttemptPolicy::Unlimited
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Verdict {
    Queued,
    Judging,
    Accepted,
    WrongAnswer,
    TimeLimitExceeded,
    MemoryLimitExceeded,
    RuntimeError,
    CompileError,
    InternalError,
}

impl Verdict {
    pub fn is_terminal(self) -> bool {
        !matches!(self, Verdict::Queued | Verdict::Judging)
    }

    /// Terminal and attributable to the submitter, so it counts as an attempt.
    pub fn counts_as_attempt(self) -> bool {
        self.is_terminal() && self != Verdict::InternalError
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Queued => "Queued",
            Verdict::Judging => "Judging",
            Verdict::Accepted => "Accepted",
            Verdict::WrongAnswer => "WrongAnswer",
            Verdict::TimeLimitExceeded => "TimeLimitExceeded",
            Verdict::MemoryLimitExceeded => "MemoryLimitExceeded",
            Verdict::RuntimeError => "RuntimeError",
            Verdict::CompileError => "CompileError",
            Verdict::InternalError => "InternalError",
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Verdict {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "Queued" => Verdict::Queued,
            "Judging" => Verdict::Judging,
            "Accepted" => Verdict::Accepted,
            "WrongAnswer" => Verdict::WrongAnswer,
            "TimeLimitExceeded" => Verdict::TimeLimitExceeded,
            "MemoryLimitExceeded" => Verdict::MemoryLimitExceeded,
            "RuntimeError" => Verdict::RuntimeError,
            "CompileError" => Verdict::CompileError,
            "InternalError" => Verdict::InternalError,
            other => return Err(format!("unknown verdict {other:?}")),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CaseOutcome {
    Pass,
    Fail,
    Timeout,
    MemoryExceeded,
    Crash,
}

impl CaseOutcome {
    /// Verdict for a submission whose first non-passing case ended this way.
    pub fn failure_verdict(self) -> Verdict {
        match self {
            CaseOutcome::Pass => Verdict::Accepted,
            CaseOutcome::Fail => Verdict::WrongAnswer,
            CaseOutcome::Timeout => Verdict::TimeLimitExceeded,
            CaseOutcome::MemoryExceeded => Verdict::MemoryLimitExceeded,
            CaseOutcome::Crash => Verdict::RuntimeError,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaseResult {
    pub case_id: CaseId,
    pub outcome: CaseOutcome,
    pub cpu_ms: u64,
    pub memory_kib: u64,
    pub stderr_excerpt: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SubmissionMode {
    Code,
    Prompt,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Submission {
    pub sid: Sid,
    pub pid: Pid,
    pub uid: Uid,
    pub language: String,
    pub mode: SubmissionMode,
    pub source: String,
    pub resolved_code: Option<String>,
    pub submitted_at: DateTime<Utc>,
    pub verdict: Verdict,
    pub case_results: Vec<CaseResult>,
    pub total_cpu_ms: Option<u64>,
    pub peak_memory_kib: u64,
    /// Diagnostic for CompileError / InternalError verdicts.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

impl Submission {
    /// The code that actually runs: resolved code for prompt mode, the
    /// source itself otherwise.
    pub fn code(&self) -> Option<&str> {
        match self.mode {
            SubmissionMode::Code => Some(&self.source),
            SubmissionMode::Prompt => self.resolved_code.as_deref(),
        }
    }
}

/// A new submission before it is assigned an id and timestamp.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NewSubmission {
    pub pid: Pid,
    pub uid: Uid,
    pub language: String,
    pub mode: SubmissionMode,
    pub source: String,
}

/// Terminal outcome written back by the judge.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JudgeOutcome {
    pub verdict: Verdict,
    pub case_results: Vec<CaseResult>,
    pub peak_memory_kib: u64,
    pub resolved_code: Option<String>,
    pub detail: Option<String>,
}
