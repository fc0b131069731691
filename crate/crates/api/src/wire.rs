//! Request and response documents. Scores are rendered as decimal strings
//! with two places; exact values travel alongside as `n/d` strings.

use std::collections::BTreeMap;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use arena_core::eval::{CheckpointSnapshot, ProblemStats, RankingEntry};
use arena_core::judge::{FilterDecision, GeneratorProgram};
use arena_core::model::{
    AttemptPolicy, CaseOutcome, CaseResult, Difficulty, GeneratorKind, Problem, ProblemStatus, Submission,
    SubmissionMode, UserAccount, UserGroup, Verdict,
};
use arena_core::store::SubmissionSummary;
use arena_core::Score;

pub const DEFAULT_LIMIT: usize = 100;
pub const MAX_LIMIT: usize = 1000;

pub fn points(s: &Score) -> String {
    s.to_decimal_string(2)
}

pub fn percent(s: &Score) -> String {
    (s * &Score::from_integer(100)).to_decimal_string(2)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Credentials {
    pub username: String,
    pub password: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenDoc {
    pub token: String,
    pub uid: String,
    pub group: UserGroup,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Page {
    pub offset: Option<usize>,
    pub limit: Option<usize>,
}

impl Page {
    pub fn apply<T>(&self, items: Vec<T>) -> Vec<T> {
        let limit = self.limit.unwrap_or(DEFAULT_LIMIT).min(MAX_LIMIT);
        items.into_iter().skip(self.offset.unwrap_or(0)).take(limit).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProblemSummaryDoc {
    pub pid: String,
    pub title: String,
    pub difficulty: Difficulty,
    pub status: ProblemStatus,
}

impl From<&Problem> for ProblemSummaryDoc {
    fn from(p: &Problem) -> Self {
        ProblemSummaryDoc {
            pid: p.pid.clone(),
            title: p.title.clone(),
            difficulty: p.difficulty,
            status: p.status,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StatsDoc {
    pub solved: u64,
    pub total: u64,
    /// Acceptance rate in percent, absent until someone attempts.
    pub ac: Option<String>,
    pub ac_exact: Option<String>,
}

impl From<&ProblemStats> for StatsDoc {
    fn from(s: &ProblemStats) -> Self {
        let ac = s.acceptance();
        StatsDoc {
            solved: s.solved,
            total: s.total,
            ac: ac.as_ref().map(percent),
            ac_exact: ac.as_ref().map(Score::to_string),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CanonicalDoc {
    pub language: String,
    pub source: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProblemDoc {
    pub pid: String,
    pub title: String,
    pub statement: String,
    pub difficulty: Difficulty,
    pub status: ProblemStatus,
    pub bps: String,
    pub cpu_limit_ms: u64,
    pub memory_limit_kib: u64,
    pub case_count: usize,
    pub stats: StatsDoc,
    /// Reference solutions; only shown to curators.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub canonical_solutions: Option<Vec<CanonicalDoc>>,
}

impl ProblemDoc {
    pub fn new(p: &Problem, stats: &ProblemStats, case_count: usize, with_solutions: bool) -> Self {
        ProblemDoc {
            pid: p.pid.clone(),
            title: p.title.clone(),
            statement: p.statement.clone(),
            difficulty: p.difficulty,
            status: p.status,
            bps: p.bps.to_string(),
            cpu_limit_ms: p.cpu_limit_ms,
            memory_limit_kib: p.memory_limit_kib,
            case_count,
            stats: stats.into(),
            canonical_solutions: with_solutions.then(|| {
                p.canonical_solutions
                    .iter()
                    .map(|c| CanonicalDoc {
                        language: c.language.clone(),
                        source: c.source.clone(),
                    })
                    .collect()
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CreatedProblem {
    pub pid: String,
}

/// One explicit case. `encoding` is `text` (default) or `base64`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaseDoc {
    pub input: String,
    pub output: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub encoding: Option<String>,
}

/// Body of `POST /api/problem/{pid}/case`: explicit cases, or a generator
/// run over `n` seeds starting at `seed0`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CaseRequest {
    Generator {
        generator: GeneratorProgram,
        n: u64,
        #[serde(default)]
        seed0: u64,
    },
    Many {
        cases: Vec<CaseDoc>,
    },
    One(CaseDoc),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaseIds {
    pub case_ids: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterRequest {
    #[serde(default)]
    pub sample_size: Option<u64>,
    #[serde(default)]
    pub generator: Option<GeneratorProgram>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterResponse {
    pub pid: String,
    pub decision: FilterDecision,
    pub status: ProblemStatus,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StatusRequest {
    pub status: ProblemStatus,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubmitRequest {
    pub pid: String,
    pub language: String,
    #[serde(default = "default_mode")]
    pub mode: SubmissionMode,
    pub source: String,
}

fn default_mode() -> SubmissionMode {
    SubmissionMode::Code
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubmitResponse {
    pub submission_id: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubmissionQuery {
    pub pid: Option<String>,
    pub uid: Option<String>,
    /// User name, resolved to a uid.
    pub user: Option<String>,
    pub verdict: Option<Verdict>,
    pub offset: Option<usize>,
    pub limit: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubmissionSummaryDoc {
    pub submission_id: String,
    pub pid: String,
    pub uid: String,
    pub language: String,
    pub mode: SubmissionMode,
    pub verdict: Verdict,
    pub submitted_at: DateTime<Utc>,
    pub total_cpu_ms: Option<u64>,
}

impl From<SubmissionSummary> for SubmissionSummaryDoc {
    fn from(s: SubmissionSummary) -> Self {
        SubmissionSummaryDoc {
            submission_id: s.sid,
            pid: s.pid,
            uid: s.uid,
            language: s.language,
            mode: s.mode,
            verdict: s.verdict,
            submitted_at: s.submitted_at,
            total_cpu_ms: s.total_cpu_ms,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaseResultDoc {
    pub case_id: String,
    pub outcome: CaseOutcome,
    pub cpu_ms: u64,
    pub memory_kib: u64,
    pub stderr_excerpt: String,
}

impl From<&CaseResult> for CaseResultDoc {
    fn from(c: &CaseResult) -> Self {
        CaseResultDoc {
            case_id: c.case_id.clone(),
            outcome: c.outcome,
            cpu_ms: c.cpu_ms,
            memory_kib: c.memory_kib,
            stderr_excerpt: c.stderr_excerpt.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubmissionDoc {
    pub submission_id: String,
    pub pid: String,
    pub uid: String,
    pub user: String,
    pub language: String,
    pub mode: SubmissionMode,
    pub source: String,
    pub resolved_code: Option<String>,
    pub submitted_at: DateTime<Utc>,
    pub verdict: Verdict,
    pub case_results: Vec<CaseResultDoc>,
    pub total_cpu_ms: Option<u64>,
    pub peak_memory_kib: u64,
    pub detail: Option<String>,
}

impl SubmissionDoc {
    pub fn new(s: &Submission, user: &str) -> Self {
        SubmissionDoc {
            submission_id: s.sid.clone(),
            pid: s.pid.clone(),
            uid: s.uid.clone(),
            user: user.to_owned(),
            language: s.language.clone(),
            mode: s.mode,
            source: s.source.clone(),
            resolved_code: s.resolved_code.clone(),
            submitted_at: s.submitted_at,
            verdict: s.verdict,
            case_results: s.case_results.iter().map(CaseResultDoc::from).collect(),
            total_cpu_ms: s.total_cpu_ms,
            peak_memory_kib: s.peak_memory_kib,
            detail: s.detail.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContributionDoc {
    pub cs: String,
    pub es: String,
}

/// One ranking row: rank, user, dynamic points and pass rate (percent).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RankingRow {
    pub rank: usize,
    pub uid: String,
    pub user: String,
    pub dp: String,
    pub pass: String,
    pub solved: u64,
    pub dp_exact: String,
    pub per_problem: BTreeMap<String, ContributionDoc>,
}

impl RankingRow {
    pub fn new(rank: usize, e: &RankingEntry, user: &str) -> Self {
        RankingRow {
            rank,
            uid: e.uid.clone(),
            user: user.to_owned(),
            dp: points(&e.dp),
            pass: percent(&e.pass_rate),
            solved: e.solved,
            dp_exact: e.dp.to_string(),
            per_problem: e
                .per_problem
                .iter()
                .map(|(pid, c)| {
                    (
                        pid.clone(),
                        ContributionDoc {
                            cs: c.cs.to_string(),
                            es: c.es.to_string(),
                        },
                    )
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckpointSummaryDoc {
    pub checkpoint_id: String,
    pub taken_at: DateTime<Utc>,
    pub audit_matched: bool,
    pub users: usize,
}

impl From<&CheckpointSnapshot> for CheckpointSummaryDoc {
    fn from(c: &CheckpointSnapshot) -> Self {
        CheckpointSummaryDoc {
            checkpoint_id: c.checkpoint_id.clone(),
            taken_at: c.taken_at,
            audit_matched: c.audit_matched,
            users: c.entries.len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckpointDoc {
    pub checkpoint_id: String,
    pub taken_at: DateTime<Utc>,
    pub audit_matched: bool,
    pub entries: Vec<RankingRow>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckpointQuery {
    pub from: Option<DateTime<Utc>>,
    pub to: Option<DateTime<Utc>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NewUserDoc {
    pub name: String,
    pub password: String,
    pub group: UserGroup,
    #[serde(default)]
    pub kind: Option<GeneratorKind>,
    #[serde(default)]
    pub backend: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UserDoc {
    pub uid: String,
    pub name: String,
    pub group: UserGroup,
    pub kind: GeneratorKind,
    pub attempt_policy: AttemptPolicy,
    pub backend: Option<String>,
}

impl From<&UserAccount> for UserDoc {
    fn from(u: &UserAccount) -> Self {
        UserDoc {
            uid: u.uid.clone(),
            name: u.name.clone(),
            group: u.group,
            kind: u.generator_kind,
            attempt_policy: u.attempt_policy,
            backend: u.backend.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn score_rendering() {
        assert_eq!(points(&Score::ratio(7, 2)), "3.50");
        assert_eq!(points(&Score::zero()), "0.00");
        assert_eq!(points(&Score::ratio(25, 8)), "3.13");
        assert_eq!(percent(&Score::ratio(1, 2)), "50.00");
        assert_eq!(percent(&Score::ratio(1, 3)), "33.33");
    }

    #[test]
    fn case_request_shapes() {
        let one: CaseRequest = serde_json::from_str(r#"{"input":"1","output":"2"}"#).unwrap();
        assert!(matches!(one, CaseRequest::One(_)));
        let many: CaseRequest = serde_json::from_str(r#"{"cases":[{"input":"1","output":"2"}]}"#).unwrap();
        assert!(matches!(many, CaseRequest::Many { .. }));
        let gen: CaseRequest =
            serde_json::from_str(r#"{"generator":{"language":"python3","source":"print(1)"},"n":3}"#).unwrap();
        assert!(matches!(gen, CaseRequest::Generator { n: 3, seed0: 0, .. }));
    }

    #[test]
    fn paging() {
        let items: Vec<u32> = (0..2000).collect();
        assert_eq!(Page::default().apply(items.clone()).len(), DEFAULT_LIMIT);
        let p = Page {
            offset: Some(1990),
            limit: Some(5000),
        };
        assert_eq!(p.apply(items.clone()), (1990..2000).collect::<Vec<_>>());
        let p = Page {
            offset: None,
            limit: Some(5000),
        };
        assert_eq!(p.apply(items).len(), MAX_LIMIT);
    }
}
