//! Durable single-node store.
//!
//! All state lives in memory behind one reader-writer lock. Every mutation
//! is appended to a line-delimited journal and synced before it is applied,
//! so a restart replays the journal to the last acknowledged write. A torn
//! final line (crash mid-append) is dropped on replay.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::{Mutex, RwLock, RwLockReadGuard, RwLockWriteGuard};

use base64::engine::general_purpose::URL_SAFE_NO_PAD;
use base64::Engine;
use chrono::{DateTime, Utc};
use rand::RngCore;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::eval::{self, CheckpointSnapshot, JudgedSubmission, ProblemStats, RankingEntry, ScoredProblem};
use crate::format::{self, ExportRecord, ImportRecord, Rejection};
use crate::model::{
    CaseResult, CaseId, GeneratorKind, JudgeOutcome, NewSubmission, Pid, Problem, ProblemStatus,
    Provenance, Sid, Submission, TestCase, Uid, UserAccount, UserGroup, Verdict,
};

const JOURNAL_FILE: &str = "journal.jsonl";

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "event", content = "data", rename_all = "snake_case")]
enum Event {
    Problem(Problem),
    Case(TestCase),
    User(UserAccount),
    Submission(Submission),
    Checkpoint(CheckpointSnapshot),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImportReport {
    pub accepted: usize,
    pub rejected: Vec<Rejection>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubmissionFilter {
    pub pid: Option<Pid>,
    pub uid: Option<Uid>,
    pub verdict: Option<Verdict>,
}

impl SubmissionFilter {
    fn matches(&self, s: &Submission) -> bool {
        self.pid.as_ref().is_none_or(|p| *p == s.pid)
            && self.uid.as_ref().is_none_or(|u| *u == s.uid)
            && self.verdict.is_none_or(|v| v == s.verdict)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubmissionSummary {
    pub sid: Sid,
    pub pid: Pid,
    pub uid: Uid,
    pub language: String,
    pub mode: crate::model::SubmissionMode,
    pub verdict: Verdict,
    pub submitted_at: DateTime<Utc>,
    pub total_cpu_ms: Option<u64>,
}

impl From<&Submission> for SubmissionSummary {
    fn from(s: &Submission) -> Self {
        SubmissionSummary {
            sid: s.sid.clone(),
            pid: s.pid.clone(),
            uid: s.uid.clone(),
            language: s.language.clone(),
            mode: s.mode,
            verdict: s.verdict,
            submitted_at: s.submitted_at,
            total_cpu_ms: s.total_cpu_ms,
        }
    }
}

#[derive(Debug, Default)]
struct State {
    problems: BTreeMap<Pid, Problem>,
    cases: BTreeMap<Pid, Vec<TestCase>>,
    users: BTreeMap<Uid, UserAccount>,
    users_by_name: HashMap<String, Uid>,
    tokens: HashMap<String, Uid>,
    submissions: BTreeMap<Sid, Submission>,
    subs_by_pid: HashMap<Pid, BTreeSet<Sid>>,
    checkpoints: BTreeMap<String, CheckpointSnapshot>,
    next_sid: u64,
    next_uid: u64,
    next_checkpoint: u64,
    last_submitted_at: Option<DateTime<Utc>>,
    last_checkpoint_at: Option<DateTime<Utc>>,
}

impl State {
    fn apply(&mut self, event: Event) {
        match event {
            Event::Problem(p) => {
                self.problems.insert(p.pid.clone(), p);
            }
            Event::Case(c) => {
                let list = self.cases.entry(c.pid.clone()).or_default();
                match list.binary_search_by_key(&c.position, |x| x.position) {
                    Ok(i) => list[i] = c,
                    Err(i) => list.insert(i, c),
                }
            }
            Event::User(u) => {
                if let Some(old) = self.users.get(&u.uid) {
                    if let Some(h) = &old.token_hash {
                        self.tokens.remove(h);
                    }
                }
                if let Some(h) = &u.token_hash {
                    self.tokens.insert(h.clone(), u.uid.clone());
                }
                self.users_by_name.insert(u.name.clone(), u.uid.clone());
                if let Some(n) = u.uid.strip_prefix('u').and_then(|n| n.parse::<u64>().ok()) {
                    self.next_uid = self.next_uid.max(n + 1);
                }
                self.users.insert(u.uid.clone(), u);
            }
            Event::Submission(s) => {
                if let Some(n) = s.sid.strip_prefix('s').and_then(|n| n.parse::<u64>().ok()) {
                    self.next_sid = self.next_sid.max(n + 1);
                }
                self.last_submitted_at = self.last_submitted_at.max(Some(s.submitted_at));
                self.subs_by_pid.entry(s.pid.clone()).or_default().insert(s.sid.clone());
                self.submissions.insert(s.sid.clone(), s);
            }
            Event::Checkpoint(cp) => {
                if let Some(n) = cp.checkpoint_id.strip_prefix("cp").and_then(|n| n.parse::<u64>().ok()) {
                    self.next_checkpoint = self.next_checkpoint.max(n + 1);
                }
                self.last_checkpoint_at = self.last_checkpoint_at.max(Some(cp.taken_at));
                self.checkpoints.insert(cp.checkpoint_id.clone(), cp);
            }
        }
    }

    fn problem(&self, pid: &str) -> Result<&Problem> {
        self.problems.get(pid).ok_or_else(|| Error::not_found("problem", pid))
    }

    fn submissions_for<'a>(&'a self, pid: &str) -> impl Iterator<Item = &'a Submission> + 'a {
        self.subs_by_pid
            .get(pid)
            .into_iter()
            .flat_map(|sids| sids.iter())
            .map(|sid| &self.submissions[sid])
    }

    fn judged(&self) -> Vec<JudgedSubmission> {
        self.submissions
            .values()
            .filter(|s| s.verdict.is_terminal())
            .map(judged_view)
            .collect()
    }
}

pub fn judged_view(s: &Submission) -> JudgedSubmission {
    JudgedSubmission {
        sid: s.sid.clone(),
        uid: s.uid.clone(),
        pid: s.pid.clone(),
        verdict: s.verdict,
        total_cpu_ms: s.total_cpu_ms,
        submitted_at: s.submitted_at,
    }
}

pub fn scored_view(p: &Problem) -> ScoredProblem {
    ScoredProblem {
        pid: p.pid.clone(),
        bps: p.bps.clone(),
        status: p.status,
    }
}

struct Journal {
    path: PathBuf,
    file: File,
}

impl Journal {
    fn append(&mut self, event: &Event) -> Result<()> {
        let mut line = serde_json::to_vec(event).map_err(|e| Error::Invalid(e.to_string()))?;
        line.push(b'\n');
        self.file.write_all(&line)?;
        self.file.sync_data()?;
        Ok(())
    }
}

pub struct Store {
    state: RwLock<State>,
    journal: Mutex<Option<Journal>>,
}

impl std::fmt::Debug for Store {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let path = self.journal.lock().ok().and_then(|j| j.as_ref().map(|j| j.path.clone()));
        f.debug_struct("Store").field("journal", &path).finish_non_exhaustive()
    }
}

impl Store {
    /// Volatile store, for tests and dry runs.
    pub fn in_memory() -> Self {
        Store {
            state: RwLock::new(State::default()),
            journal: Mutex::new(None),
        }
    }

    /// Opens (or creates) a store under `dir`, replaying its journal.
    pub fn open(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir)?;
        let path = dir.join(JOURNAL_FILE);
        let mut state = State::default();
        let mut good_len = 0u64;
        if path.exists() {
            let reader = BufReader::new(File::open(&path)?);
            let mut lines = reader.split(b'\n').enumerate().peekable();
            while let Some((idx, line)) = lines.next() {
                let line = line?;
                let is_last = lines.peek().is_none();
                if line.iter().all(u8::is_ascii_whitespace) {
                    good_len += line.len() as u64 + 1;
                    continue;
                }
                match serde_json::from_slice::<Event>(&line) {
                    Ok(ev) => {
                        state.apply(ev);
                        good_len += line.len() as u64 + 1;
                    }
                    Err(e) if is_last => {
                        tracing::warn!(line = idx + 1, error = %e, "dropping torn journal tail");
                    }
                    Err(e) => {
                        return Err(Error::Corrupt {
                            line: idx + 1,
                            message: e.to_string(),
                        })
                    }
                }
            }
        }
        let mut file = OpenOptions::new().create(true).append(true).read(true).open(&path)?;
        let len = file.metadata()?.len();
        if len > good_len {
            file.set_len(good_len)?;
        } else if len + 1 == good_len {
            // Last record intact but its newline never hit the disk.
            file.write_all(b"\n")?;
            file.sync_data()?;
        }
        Ok(Store {
            state: RwLock::new(state),
            journal: Mutex::new(Some(Journal { path, file })),
        })
    }

    fn read(&self) -> RwLockReadGuard<'_, State> {
        self.state.read().unwrap_or_else(|e| e.into_inner())
    }

    fn write(&self) -> RwLockWriteGuard<'_, State> {
        self.state.write().unwrap_or_else(|e| e.into_inner())
    }

    /// Journals then applies. Callers hold the write guard, which orders
    /// journal lines exactly as they are applied.
    fn commit(&self, state: &mut State, event: Event) -> Result<()> {
        let mut journal = self.journal.lock().unwrap_or_else(|e| e.into_inner());
        if let Some(j) = journal.as_mut() {
            j.append(&event)?;
        }
        state.apply(event);
        Ok(())
    }

    // ---- problems -------------------------------------------------------

    /// Imports a line-delimited archive. Valid records become draft problems
    /// with their explicit cases; records whose pid already exists (in the
    /// store or earlier in the archive) are rejected as duplicates.
    pub fn import_problems(&self, archive: &str) -> Result<ImportReport> {
        let parsed = format::parse_archive(archive)?;
        let mut rejected = parsed.rejected;
        let mut accepted = 0;
        let mut state = self.write();
        for (line, record) in parsed.records {
            let pid = record.problem.pid.clone();
            if state.problems.contains_key(&pid) {
                rejected.push(Rejection {
                    pid,
                    line,
                    reason: "duplicate".into(),
                });
                continue;
            }
            self.insert_record(&mut state, record)?;
            accepted += 1;
        }
        rejected.sort_by_key(|r| r.line);
        Ok(ImportReport { accepted, rejected })
    }

    /// Creates a single draft problem.
    pub fn create_problem(&self, record: ImportRecord) -> Result<Pid> {
        let mut state = self.write();
        if state.problems.contains_key(&record.problem.pid) {
            return Err(Error::Duplicate {
                kind: "problem",
                id: record.problem.pid,
            });
        }
        let pid = record.problem.pid.clone();
        self.insert_record(&mut state, record)?;
        Ok(pid)
    }

    fn insert_record(&self, state: &mut State, record: ImportRecord) -> Result<()> {
        let mut problem = record.problem;
        problem.status = ProblemStatus::Draft;
        let pid = problem.pid.clone();
        self.commit(state, Event::Problem(problem))?;
        for (position, (input, expected_output)) in record.cases.into_iter().enumerate() {
            let position = position as u32;
            self.commit(
                state,
                Event::Case(TestCase {
                    case_id: case_id(&pid, position),
                    pid: pid.clone(),
                    input,
                    expected_output,
                    provenance: Provenance::Imported,
                    position,
                }),
            )?;
        }
        Ok(())
    }

    pub fn problem(&self, pid: &str) -> Result<Problem> {
        self.read().problem(pid).cloned()
    }

    /// Problem snapshot plus solver counts.
    pub fn get_problem(&self, pid: &str) -> Result<(Problem, ProblemStats)> {
        let state = self.read();
        let problem = state.problem(pid)?.clone();
        let judged: Vec<JudgedSubmission> = state
            .submissions_for(pid)
            .filter(|s| s.verdict.is_terminal())
            .map(judged_view)
            .collect();
        Ok((problem, eval::problem_stats(pid, &judged)))
    }

    pub fn list_problems(&self) -> Vec<Problem> {
        self.read().problems.values().cloned().collect()
    }

    /// Changes a problem's status. Activation requires at least one case
    /// and one canonical solution.
    pub fn set_problem_status(&self, pid: &str, status: ProblemStatus) -> Result<Problem> {
        let mut state = self.write();
        let mut problem = state.problem(pid)?.clone();
        if problem.status == status {
            return Ok(problem);
        }
        if status == ProblemStatus::Active {
            let n_cases = state.cases.get(pid).map_or(0, Vec::len);
            if n_cases == 0 || problem.canonical_solutions.is_empty() {
                return Err(Error::Invalid(format!(
                    "problem {pid} needs at least one test case and one canonical solution to be active"
                )));
            }
        }
        problem.status = status;
        self.commit(&mut state, Event::Problem(problem.clone()))?;
        Ok(problem)
    }

    pub fn cases(&self, pid: &str) -> Result<Vec<TestCase>> {
        let state = self.read();
        state.problem(pid)?;
        Ok(state.cases.get(pid).cloned().unwrap_or_default())
    }

    /// Appends cases after the current last position.
    pub fn add_cases(&self, pid: &str, cases: Vec<(Vec<u8>, Vec<u8>, Provenance)>) -> Result<Vec<CaseId>> {
        let mut state = self.write();
        state.problem(pid)?;
        let first = state
            .cases
            .get(pid)
            .and_then(|l| l.last())
            .map_or(0, |c| c.position + 1);
        let mut ids = Vec::with_capacity(cases.len());
        for (next, (input, expected_output, provenance)) in (first..).zip(cases) {
            let id = case_id(pid, next);
            self.commit(
                &mut state,
                Event::Case(TestCase {
                    case_id: id.clone(),
                    pid: pid.to_owned(),
                    input,
                    expected_output,
                    provenance,
                    position: next,
                }),
            )?;
            ids.push(id);
        }
        Ok(ids)
    }

    // ---- users and tokens ----------------------------------------------

    pub fn create_user(
        &self,
        name: &str,
        password: &str,
        group: UserGroup,
        kind: GeneratorKind,
        backend: Option<String>,
    ) -> Result<UserAccount> {
        if name.trim().is_empty() {
            return Err(Error::Invalid("user name must be non-empty".into()));
        }
        match (group, kind) {
            (UserGroup::Generator, GeneratorKind::None) => {
                return Err(Error::Invalid("generators must be machine or human".into()))
            }
            (UserGroup::Curator | UserGroup::Reader, GeneratorKind::Machine | GeneratorKind::Human) => {
                return Err(Error::Invalid("only generators have a generator kind".into()))
            }
            _ => {}
        }
        let mut state = self.write();
        if state.users_by_name.contains_key(name) {
            return Err(Error::Duplicate {
                kind: "user",
                id: name.to_owned(),
            });
        }
        let user = UserAccount {
            uid: format!("u{:06}", state.next_uid),
            name: name.to_owned(),
            group,
            generator_kind: kind,
            token_hash: None,
            attempt_policy: UserAccount::policy_for(group, kind),
            password_hash: hash_password(password),
            backend,
        };
        self.commit(&mut state, Event::User(user.clone()))?;
        Ok(user)
    }

    pub fn user(&self, uid: &str) -> Result<UserAccount> {
        self.read()
            .users
            .get(uid)
            .cloned()
            .ok_or_else(|| Error::not_found("user", uid))
    }

    pub fn user_by_name(&self, name: &str) -> Option<UserAccount> {
        let state = self.read();
        state.users_by_name.get(name).map(|uid| state.users[uid].clone())
    }

    pub fn list_users(&self) -> Vec<UserAccount> {
        self.read().users.values().cloned().collect()
    }

    /// Verifies credentials and issues a fresh token, revoking any prior one.
    /// Only the token digest is stored.
    pub fn issue_token(&self, name: &str, password: &str) -> Result<(UserAccount, String)> {
        let mut state = self.write();
        let uid = state.users_by_name.get(name).cloned().ok_or(Error::BadCredentials)?;
        let mut user = state.users[&uid].clone();
        if !verify_password(&user.password_hash, password) {
            return Err(Error::BadCredentials);
        }
        let mut raw = [0u8; 32];
        rand::thread_rng().fill_bytes(&mut raw);
        let token = URL_SAFE_NO_PAD.encode(raw);
        user.token_hash = Some(token_digest(&token));
        self.commit(&mut state, Event::User(user.clone()))?;
        Ok((user, token))
    }

    pub fn revoke_token(&self, uid: &str) -> Result<()> {
        let mut state = self.write();
        let mut user = state.users.get(uid).cloned().ok_or_else(|| Error::not_found("user", uid))?;
        if user.token_hash.take().is_some() {
            self.commit(&mut state, Event::User(user))?;
        }
        Ok(())
    }

    pub fn authenticate(&self, token: &str) -> Option<UserAccount> {
        let state = self.read();
        let uid = state.tokens.get(&token_digest(token))?;
        state.users.get(uid).cloned()
    }

    // ---- submissions ----------------------------------------------------

    /// Records a new submission as `Queued`. Enforces judgeability of the
    /// problem, the generator group, and the single-attempt policy (any
    /// submission other than an `InternalError` consumes the attempt).
    pub fn record_submission(&self, new: NewSubmission) -> Result<Submission> {
        let mut state = self.write();
        let problem = state.problem(&new.pid)?;
        if !problem.status.is_judgeable() {
            return Err(Error::NotJudgeable(new.pid));
        }
        let user = state
            .users
            .get(&new.uid)
            .ok_or_else(|| Error::not_found("user", new.uid.clone()))?;
        if user.group != UserGroup::Generator {
            return Err(Error::Forbidden("only generators submit solutions".into()));
        }
        if user.attempt_policy == crate::model::AttemptPolicy::Single
            && state
                .submissions_for(&new.pid)
                .any(|s| s.uid == new.uid && s.verdict != Verdict::InternalError)
        {
            return Err(Error::AttemptExhausted(new.pid));
        }
        let now = Utc::now();
        let submitted_at = state.last_submitted_at.map_or(now, |last| last.max(now));
        let sub = Submission {
            sid: format!("s{:010}", state.next_sid),
            pid: new.pid,
            uid: new.uid,
            language: new.language,
            mode: new.mode,
            source: new.source,
            resolved_code: None,
            submitted_at,
            verdict: Verdict::Queued,
            case_results: Vec::new(),
            total_cpu_ms: None,
            peak_memory_kib: 0,
            detail: None,
        };
        self.commit(&mut state, Event::Submission(sub.clone()))?;
        Ok(sub)
    }

    pub fn submission(&self, sid: &str) -> Result<Submission> {
        self.read()
            .submissions
            .get(sid)
            .cloned()
            .ok_or_else(|| Error::not_found("submission", sid))
    }

    pub fn list_submissions(&self, filter: &SubmissionFilter) -> Vec<SubmissionSummary> {
        let state = self.read();
        let iter: Box<dyn Iterator<Item = &Submission>> = match &filter.pid {
            Some(pid) => Box::new(state.submissions_for(pid)),
            None => Box::new(state.submissions.values()),
        };
        iter.filter(|s| filter.matches(s)).map(SubmissionSummary::from).collect()
    }

    /// `Queued -> Judging`.
    pub fn mark_judging(&self, sid: &str) -> Result<Submission> {
        let mut state = self.write();
        let mut sub = state
            .submissions
            .get(sid)
            .cloned()
            .ok_or_else(|| Error::not_found("submission", sid))?;
        if sub.verdict.is_terminal() {
            return Err(Error::AlreadyTerminal(sid.to_owned()));
        }
        if sub.verdict != Verdict::Judging {
            sub.verdict = Verdict::Judging;
            self.commit(&mut state, Event::Submission(sub.clone()))?;
        }
        Ok(sub)
    }

    /// Writes the terminal verdict. `total_cpu_ms` is set exactly when the
    /// verdict is `Accepted`.
    pub fn complete_submission(&self, sid: &str, outcome: JudgeOutcome) -> Result<Submission> {
        if !outcome.verdict.is_terminal() {
            return Err(Error::Invalid(format!("{} is not a terminal verdict", outcome.verdict)));
        }
        let all_pass = outcome
            .case_results
            .iter()
            .all(|c| c.outcome == crate::model::CaseOutcome::Pass);
        if outcome.verdict == Verdict::Accepted && !all_pass {
            return Err(Error::Invalid("accepted verdict with failing case".into()));
        }
        let mut state = self.write();
        let mut sub = state
            .submissions
            .get(sid)
            .cloned()
            .ok_or_else(|| Error::not_found("submission", sid))?;
        if sub.verdict.is_terminal() {
            return Err(Error::AlreadyTerminal(sid.to_owned()));
        }
        sub.total_cpu_ms = (outcome.verdict == Verdict::Accepted)
            .then(|| outcome.case_results.iter().map(|c: &CaseResult| c.cpu_ms).sum());
        sub.verdict = outcome.verdict;
        sub.case_results = outcome.case_results;
        sub.peak_memory_kib = outcome.peak_memory_kib;
        if outcome.resolved_code.is_some() {
            sub.resolved_code = outcome.resolved_code;
        }
        sub.detail = outcome.detail;
        self.commit(&mut state, Event::Submission(sub.clone()))?;
        Ok(sub)
    }

    /// Resets interrupted `Judging` submissions to `Queued` and returns every
    /// pending sid in submission order. Used on startup.
    pub fn requeue_pending(&self) -> Result<Vec<(Sid, Uid)>> {
        let mut state = self.write();
        let judging: Vec<Submission> = state
            .submissions
            .values()
            .filter(|s| s.verdict == Verdict::Judging)
            .cloned()
            .collect();
        for mut s in judging {
            s.verdict = Verdict::Queued;
            self.commit(&mut state, Event::Submission(s))?;
        }
        Ok(state
            .submissions
            .values()
            .filter(|s| s.verdict == Verdict::Queued)
            .map(|s| (s.sid.clone(), s.uid.clone()))
            .collect())
    }

    /// Every stored submission for `pid` with its problem and cases, as one
    /// archive line. Deterministic for an unchanged store.
    pub fn export_solutions(&self, pid: &str) -> Result<String> {
        let state = self.read();
        let problem = state.problem(pid)?;
        let cases = state.cases.get(pid).map(Vec::as_slice).unwrap_or(&[]);
        let subs: Vec<Submission> = state.submissions_for(pid).cloned().collect();
        Ok(ExportRecord::build(problem, cases, &subs).to_line())
    }

    /// Problems and terminal submissions, the full input of a ranking
    /// recompute, taken under one read lock.
    pub fn scoring_input(&self) -> (Vec<ScoredProblem>, Vec<JudgedSubmission>) {
        let state = self.read();
        (state.problems.values().map(scored_view).collect(), state.judged())
    }

    // ---- checkpoints ----------------------------------------------------

    pub fn add_checkpoint(&self, entries: Vec<RankingEntry>, audit_matched: bool) -> Result<CheckpointSnapshot> {
        let mut state = self.write();
        let now = Utc::now();
        let taken_at = state.last_checkpoint_at.map_or(now, |last| last.max(now));
        let cp = CheckpointSnapshot {
            checkpoint_id: format!("cp{:06}", state.next_checkpoint),
            taken_at,
            entries,
            audit_matched,
        };
        self.commit(&mut state, Event::Checkpoint(cp.clone()))?;
        Ok(cp)
    }

    pub fn checkpoint(&self, id: &str) -> Result<CheckpointSnapshot> {
        self.read()
            .checkpoints
            .get(id)
            .cloned()
            .ok_or_else(|| Error::not_found("checkpoint", id))
    }

    /// Checkpoints with `from <= taken_at <= to`, oldest first.
    pub fn checkpoints(&self, from: Option<DateTime<Utc>>, to: Option<DateTime<Utc>>) -> Vec<CheckpointSnapshot> {
        self.read()
            .checkpoints
            .values()
            .filter(|c| from.is_none_or(|f| c.taken_at >= f) && to.is_none_or(|t| c.taken_at <= t))
            .cloned()
            .collect()
    }

    pub fn last_checkpoint_at(&self) -> Option<DateTime<Utc>> {
        self.read().last_checkpoint_at
    }
}

fn case_id(pid: &str, position: u32) -> CaseId {
    format!("{pid}-c{position:04}")
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn token_digest(token: &str) -> String {
    hex(&Sha256::digest(token.as_bytes()))
}

fn hash_password(password: &str) -> String {
    let mut salt = [0u8; 16];
    rand::thread_rng().fill_bytes(&mut salt);
    let salt = hex(&salt);
    let digest = Sha256::new()
        .chain_update(salt.as_bytes())
        .chain_update(password.as_bytes())
        .finalize();
    format!("{salt}${}", hex(&digest))
}

fn verify_password(stored: &str, password: &str) -> bool {
    let Some((salt, expected)) = stored.split_once('$') else {
        return false;
    };
    let digest = Sha256::new()
        .chain_update(salt.as_bytes())
        .chain_update(password.as_bytes())
        .finalize();
    let actual = hex(&digest);
    actual.len() == expected.len()
        && actual
            .bytes()
            .zip(expected.bytes())
            .fold(0u8, |acc, (a, b)| acc | (a ^ b))
            == 0
}
