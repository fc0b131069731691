//! The running judge service: store, sandbox, judge workers and the live
//! leaderboard behind one handle.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::{Arc, Mutex, MutexGuard};
use std::thread::JoinHandle;
use std::time::Duration;

use crate::error::{Error, Result};
use crate::eval::{self, CheckpointSnapshot, Leaderboard, ProblemStats, RankingEntry};
use crate::format::ImportRecord;
use crate::judge::{self, BackendRegistry, FilterDecision, GeneratorProgram, HealthIssue};
use crate::model::{
    CaseId, JudgeOutcome, NewSubmission, Pid, ProblemStatus, Provenance, Submission, SubmissionMode, UserGroup,
    Verdict,
};
use crate::parallel::ExecMode;
use crate::queue::{JudgeQueue, Ticket};
use crate::sandbox::Sandbox;
use crate::store::{self, ImportReport, Store};

#[derive(Debug, Clone)]
pub struct ArenaOptions {
    pub workers: usize,
    pub exec_mode: ExecMode,
}

impl Default for ArenaOptions {
    fn default() -> Self {
        ArenaOptions {
            workers: std::thread::available_parallelism().map_or(1, |n| n.get()),
            exec_mode: ExecMode::default(),
        }
    }
}

struct Inner {
    store: Arc<Store>,
    sandbox: Arc<Sandbox>,
    backends: BackendRegistry,
    board: Mutex<Leaderboard>,
    queue: JudgeQueue,
    mode: ExecMode,
}

pub struct Arena {
    inner: Arc<Inner>,
    workers: Mutex<Vec<JoinHandle<()>>>,
}

impl std::fmt::Debug for Arena {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Arena")
            .field("sandbox", &self.inner.sandbox)
            .field("backends", &self.inner.backends)
            .field("queued", &self.inner.queue.queued())
            .finish()
    }
}

impl Arena {
    /// Rebuilds the leaderboard from the store, re-queues interrupted work
    /// and starts the judge workers.
    pub fn start(
        store: Arc<Store>,
        sandbox: Arc<Sandbox>,
        backends: BackendRegistry,
        options: ArenaOptions,
    ) -> Result<Self> {
        let (problems, subs) = store.scoring_input();
        let board = Leaderboard::from_input(&problems, &subs)?;
        let inner = Arc::new(Inner {
            store,
            sandbox,
            backends,
            board: Mutex::new(board),
            queue: JudgeQueue::new(),
            mode: options.exec_mode,
        });
        let pending = inner.store.requeue_pending()?;
        if !pending.is_empty() {
            tracing::info!(count = pending.len(), "re-queued pending submissions");
        }
        for (sid, uid) in pending {
            inner.queue.push(&uid, &sid);
        }
        let workers = (0..options.workers.max(1))
            .map(|i| {
                let inner = inner.clone();
                std::thread::Builder::new()
                    .name(format!("judge-{i}"))
                    .spawn(move || inner.work())
                    .map_err(Error::Io)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Arena {
            inner,
            workers: Mutex::new(workers),
        })
    }

    pub fn store(&self) -> &Store {
        &self.inner.store
    }

    pub fn sandbox(&self) -> &Sandbox {
        &self.inner.sandbox
    }

    pub fn exec_mode(&self) -> ExecMode {
        self.inner.mode
    }

    fn board(&self) -> MutexGuard<'_, Leaderboard> {
        self.inner.board()
    }

    // ---- problems -------------------------------------------------------

    pub fn create_problem(&self, record: ImportRecord) -> Result<Pid> {
        let mut board = self.board();
        let pid = self.inner.store.create_problem(record)?;
        board.upsert_problem(&store::scored_view(&self.inner.store.problem(&pid)?));
        Ok(pid)
    }

    pub fn import(&self, archive: &str) -> Result<ImportReport> {
        let report = self.inner.store.import_problems(archive)?;
        let mut board = self.board();
        for p in self.inner.store.list_problems() {
            board.upsert_problem(&store::scored_view(&p));
        }
        Ok(report)
    }

    pub fn set_status(&self, pid: &str, status: ProblemStatus) -> Result<()> {
        let mut board = self.board();
        let p = self.inner.store.set_problem_status(pid, status)?;
        board.upsert_problem(&store::scored_view(&p));
        Ok(())
    }

    /// Solver counts as the leaderboard sees them.
    pub fn problem_stats(&self, pid: &str) -> Result<ProblemStats> {
        self.inner.store.problem(pid)?;
        Ok(self.board().stats(pid).unwrap_or(ProblemStats {
            pid: pid.to_owned(),
            solved: 0,
            total: 0,
        }))
    }

    pub fn add_explicit_cases(&self, pid: &str, cases: Vec<(Vec<u8>, Vec<u8>)>) -> Result<Vec<CaseId>> {
        let cases = cases.into_iter().map(|(i, o)| (i, o, Provenance::Imported)).collect();
        self.inner.store.add_cases(pid, cases)
    }

    /// Generates cases with `generator` and stores the agreed ones. Any
    /// disagreement between canonical solutions marks the problem ambiguous
    /// and stores nothing.
    pub fn generate_cases(&self, pid: &str, generator: &GeneratorProgram, n: u64, seed0: u64) -> Result<Vec<CaseId>> {
        let problem = self.inner.store.problem(pid)?;
        let report = match judge::generate_cases(&self.inner.sandbox, &problem, generator, n, seed0, self.inner.mode) {
            Ok(r) if r.disagreements.is_empty() => r,
            Ok(r) => {
                self.set_status(pid, ProblemStatus::Ambiguous)?;
                return Err(Error::Ambiguous {
                    pid: pid.to_owned(),
                    disagreements: r.disagreements.len(),
                });
            }
            Err(e @ Error::Ambiguous { .. }) => {
                self.set_status(pid, ProblemStatus::Ambiguous)?;
                return Err(e);
            }
            Err(e) => return Err(e),
        };
        let cases = report
            .cases
            .into_iter()
            .map(|c| (c.input, c.expected_output, Provenance::Generated { seed: c.seed }))
            .collect();
        self.inner.store.add_cases(pid, cases)
    }

    /// Checks canonical agreement. A kept draft with cases becomes active; a
    /// disagreement marks the problem ambiguous. Inconclusive runs leave the
    /// status alone and return the error.
    pub fn consistency_filter(
        &self,
        pid: &str,
        sample_size: u64,
        generator: Option<&GeneratorProgram>,
    ) -> Result<FilterDecision> {
        let problem = self.inner.store.problem(pid)?;
        let cases = self.inner.store.cases(pid)?;
        let decision = judge::consistency_check(
            &self.inner.sandbox,
            &problem,
            &cases,
            sample_size,
            generator,
            0,
            self.inner.mode,
        )?;
        match decision {
            FilterDecision::MarkAmbiguous => {
                tracing::warn!(event = "problem_ambiguous", %pid, "canonical solutions disagree");
                self.set_status(pid, ProblemStatus::Ambiguous)?;
            }
            FilterDecision::Keep if problem.status == ProblemStatus::Draft => {
                if !cases.is_empty() {
                    self.set_status(pid, ProblemStatus::Active)?;
                }
            }
            FilterDecision::Keep => {}
        }
        Ok(decision)
    }

    /// Runs every active problem's canonical solutions against its own
    /// cases and logs each failure.
    pub fn health_check(&self) -> Vec<HealthIssue> {
        let mut issues = Vec::new();
        for p in self.inner.store.list_problems() {
            if p.status != ProblemStatus::Active {
                continue;
            }
            let cases = self.inner.store.cases(&p.pid).unwrap_or_default();
            for issue in judge::canonical_self_check(&self.inner.sandbox, &p, &cases) {
                tracing::error!(
                    event = "health_check",
                    pid = %issue.pid,
                    solution = issue.solution,
                    verdict = %issue.verdict,
                    "canonical solution fails its own cases"
                );
                issues.push(issue);
            }
        }
        tracing::info!(event = "health_check", issues = issues.len(), "health check finished");
        issues
    }

    // ---- submissions ----------------------------------------------------

    /// Validates and records a submission, then queues it for judging.
    pub fn submit(&self, new: NewSubmission) -> Result<Submission> {
        let user = self.inner.store.user(&new.uid)?;
        if user.group != UserGroup::Generator {
            return Err(Error::Forbidden("only generators submit solutions".into()));
        }
        if self.inner.sandbox.registry().get(&new.language).is_none() {
            return Err(Error::Invalid(format!("unknown language {}", new.language)));
        }
        if new.source.is_empty() {
            return Err(Error::Invalid("empty source".into()));
        }
        if new.mode == SubmissionMode::Prompt
            && !user.backend.as_deref().is_some_and(|b| self.inner.backends.contains(b))
        {
            return Err(Error::Invalid(format!("no prompt backend configured for {}", user.name)));
        }
        let sub = self.inner.store.record_submission(new)?;
        if !self.inner.queue.push(&sub.uid, &sub.sid) {
            tracing::warn!(sid = %sub.sid, "queue closed; submission will be judged after restart");
        }
        Ok(sub)
    }

    /// Blocks until the queue is empty and no judging is in flight.
    pub fn wait_idle(&self, timeout: Duration) -> bool {
        self.inner.queue.wait_idle(timeout)
    }

    pub fn queued(&self) -> usize {
        self.inner.queue.queued()
    }

    // ---- ranking ----------------------------------------------------------

    pub fn ranking(&self) -> Vec<RankingEntry> {
        self.board().entries()
    }

    /// Freezes the current ranking. The incremental state is audited
    /// against a from-scratch recompute first; on mismatch the recompute
    /// wins and the incremental state is rebuilt.
    pub fn checkpoint(&self) -> Result<CheckpointSnapshot> {
        let mut board = self.board();
        let (problems, subs) = self.inner.store.scoring_input();
        let audit = eval::recompute_ranking(&problems, &subs, self.inner.mode);
        let incremental = board.entries();
        let matched = incremental == audit;
        if !matched {
            tracing::error!(event = "audit_mismatch", "incremental ranking diverged; replacing");
            *board = Leaderboard::from_input(&problems, &subs)?;
        }
        let cp = self.inner.store.add_checkpoint(audit, matched)?;
        tracing::info!(checkpoint = %cp.checkpoint_id, users = cp.entries.len(), audit_matched = matched, "checkpoint taken");
        Ok(cp)
    }

    /// Stops handing out work and waits up to `timeout` for in-flight
    /// judging to finish. Anything left over is re-queued on next start.
    pub fn shutdown(&self, timeout: Duration) -> bool {
        self.inner.queue.close();
        let drained = self.inner.queue.wait_no_in_flight(timeout);
        if drained {
            let workers = std::mem::take(&mut *self.workers.lock().unwrap_or_else(|e| e.into_inner()));
            for w in workers {
                let _ = w.join();
            }
        } else {
            tracing::warn!("shutdown timed out with judging in flight");
        }
        drained
    }
}

impl Drop for Arena {
    fn drop(&mut self) {
        self.inner.queue.close();
    }
}

impl Inner {
    fn board(&self) -> MutexGuard<'_, Leaderboard> {
        self.board.lock().unwrap_or_else(|e| e.into_inner())
    }

    fn work(&self) {
        while let Some(ticket) = self.queue.pop() {
            if let Err(panic) = catch_unwind(AssertUnwindSafe(|| self.process(&ticket))) {
                let msg = panic
                    .downcast_ref::<String>()
                    .cloned()
                    .or_else(|| panic.downcast_ref::<&str>().map(|s| s.to_string()))
                    .unwrap_or_default();
                tracing::error!(sid = %ticket.sid, panic = %msg, "judge worker panicked");
                let _ = self.finish(
                    &ticket.sid,
                    JudgeOutcome {
                        verdict: Verdict::InternalError,
                        case_results: Vec::new(),
                        peak_memory_kib: 0,
                        resolved_code: None,
                        detail: Some(format!("judge panicked: {msg}")),
                    },
                );
            }
            self.queue.done(&ticket);
        }
    }

    fn process(&self, ticket: &Ticket) {
        let sub = match self.store.mark_judging(&ticket.sid) {
            Ok(s) => s,
            Err(Error::AlreadyTerminal(_)) => return,
            Err(e) => {
                tracing::error!(sid = %ticket.sid, error = %e, "cannot start judging");
                return;
            }
        };
        let outcome = match (self.store.problem(&sub.pid), self.store.cases(&sub.pid)) {
            (Ok(problem), Ok(cases)) => {
                let backend = self
                    .store
                    .user(&sub.uid)
                    .ok()
                    .and_then(|u| u.backend)
                    .and_then(|b| self.backends.get(&b));
                judge::judge_submission(&self.sandbox, backend.as_deref(), &sub, &problem, &cases)
            }
            (Err(e), _) | (_, Err(e)) => JudgeOutcome {
                verdict: Verdict::InternalError,
                case_results: Vec::new(),
                peak_memory_kib: 0,
                resolved_code: None,
                detail: Some(e.to_string()),
            },
        };
        if let Err(e) = self.finish(&sub.sid, outcome) {
            tracing::error!(sid = %sub.sid, error = %e, "failed to record verdict");
        }
    }

    /// Persists the verdict, then notifies the leaderboard. Both happen
    /// under the board lock so checkpoints never see one without the other.
    fn finish(&self, sid: &str, outcome: JudgeOutcome) -> Result<()> {
        let mut board = self.board();
        let sub = self.store.complete_submission(sid, outcome)?;
        tracing::info!(
            sid = %sub.sid,
            pid = %sub.pid,
            uid = %sub.uid,
            verdict = %sub.verdict,
            total_cpu_ms = ?sub.total_cpu_ms,
            "judged"
        );
        board.apply(&store::judged_view(&sub))?;
        Ok(())
    }
}
