//! Collective scoring.
//!
//! For every problem `i`:
//!
//! ```text
//! AC_i = S_solved_i / S_total_i
//! CS_i = BPS_i * (1 - AC_i)
//! ES_i(u) = |{ v in solvers_i : rt(u) <= rt(v) }| / |solvers_i|
//! DP(u) = sum over problems u solved of CS_i + ES_i(u)
//! ```
//!
//! `S_total_i` counts distinct users with at least one terminal submission
//! that is not an `InternalError`; `S_solved_i` counts distinct users with
//! at least one `Accepted`. A solver is represented by their fastest
//! accepted total CPU time. Only problems whose status counts for scoring
//! contribute.
//!
//! [`Leaderboard`] is the incremental state fed one judged submission at a
//! time; [`recompute_ranking`] rebuilds the same ranking from scratch. Both
//! use exact rationals and must agree with zero tolerance.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, HashSet};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::model::{Pid, ProblemStatus, Sid, Uid, Verdict};
use crate::parallel::{self, ExecMode};
use crate::score::Score;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProblemStats {
    pub pid: Pid,
    pub solved: u64,
    pub total: u64,
}

impl ProblemStats {
    /// `None` while nobody has attempted the problem.
    pub fn acceptance(&self) -> Option<Score> {
        acceptance_rate(self.solved, self.total)
    }
}

/// `S_solved / S_total`, undefined when `S_total == 0`.
pub fn acceptance_rate(solved: u64, total: u64) -> Option<Score> {
    if total == 0 {
        return None;
    }
    debug_assert!(solved <= total);
    Some(Score::ratio(solved, total))
}

pub fn challenge_score(bps: &Score, ac: &Score) -> Score {
    bps * &(Score::one() - ac.clone())
}

/// Inclusive runtime percentile of `current` within `solved_runtimes`
/// (which must contain `current`). `None` when the precondition fails.
pub fn efficiency_score(current: u64, solved_runtimes: &[u64]) -> Option<Score> {
    if solved_runtimes.is_empty() || !solved_runtimes.contains(&current) {
        return None;
    }
    let at_least = solved_runtimes.iter().filter(|&&rt| current <= rt).count() as u64;
    Some(Score::ratio(at_least, solved_runtimes.len() as u64))
}

/// Problem metadata the scorer needs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScoredProblem {
    pub pid: Pid,
    pub bps: Score,
    pub status: ProblemStatus,
}

/// A terminal submission as seen by the scorer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JudgedSubmission {
    pub sid: Sid,
    pub uid: Uid,
    pub pid: Pid,
    pub verdict: Verdict,
    /// Present iff `verdict == Accepted`.
    pub total_cpu_ms: Option<u64>,
    pub submitted_at: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Contribution {
    pub cs: Score,
    pub es: Score,
}

impl Contribution {
    pub fn total(&self) -> Score {
        &self.cs + &self.es
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RankingEntry {
    pub uid: Uid,
    pub dp: Score,
    /// Solved active problems.
    pub solved: u64,
    /// `solved / active problems`, zero when there are no active problems.
    pub pass_rate: Score,
    pub per_problem: BTreeMap<Pid, Contribution>,
    /// Latest of the per-problem first-accept times; the tie-breaker.
    pub last_accepted_at: Option<DateTime<Utc>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckpointSnapshot {
    pub checkpoint_id: String,
    pub taken_at: DateTime<Utc>,
    pub entries: Vec<RankingEntry>,
    /// Whether the from-scratch audit at capture time matched the
    /// incremental state.
    pub audit_matched: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ScoringError {
    #[error("unknown problem {0}")]
    UnknownProblem(Pid),
    #[error("submission {0} is not terminal")]
    NotTerminal(Sid),
    #[error("accepted submission {0} has no runtime")]
    MissingRuntime(Sid),
}

/// dp descending, then earlier last-accept (users without one last), then uid.
pub fn ranking_order(a: &RankingEntry, b: &RankingEntry) -> Ordering {
    b.dp.cmp(&a.dp)
        .then_with(|| match (&a.last_accepted_at, &b.last_accepted_at) {
            (Some(x), Some(y)) => x.cmp(y),
            (Some(_), None) => Ordering::Less,
            (None, Some(_)) => Ordering::Greater,
            (None, None) => Ordering::Equal,
        })
        .then_with(|| a.uid.cmp(&b.uid))
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct SolverRecord {
    best_rt: u64,
    first_accepted_at: DateTime<Utc>,
}

#[derive(Debug, Clone, Default)]
struct ProblemTally {
    bps: Score,
    status: Option<ProblemStatus>,
    attempted: BTreeSet<Uid>,
    solvers: BTreeMap<Uid, SolverRecord>,
    contributions: BTreeMap<Uid, Contribution>,
}

impl ProblemTally {
    fn counts(&self) -> bool {
        self.status.is_some_and(ProblemStatus::counts_for_scoring)
    }

    fn absorb(&mut self, sub: &JudgedSubmission) -> Result<bool, ScoringError> {
        if !sub.verdict.is_terminal() {
            return Err(ScoringError::NotTerminal(sub.sid.clone()));
        }
        if !sub.verdict.counts_as_attempt() {
            return Ok(false);
        }
        let mut changed = self.attempted.insert(sub.uid.clone());
        if sub.verdict == Verdict::Accepted {
            let rt = sub
                .total_cpu_ms
                .ok_or_else(|| ScoringError::MissingRuntime(sub.sid.clone()))?;
            match self.solvers.get_mut(&sub.uid) {
                Some(rec) => {
                    if rt < rec.best_rt {
                        rec.best_rt = rt;
                        changed = true;
                    }
                    if sub.submitted_at < rec.first_accepted_at {
                        rec.first_accepted_at = sub.submitted_at;
                        changed = true;
                    }
                }
                None => {
                    self.solvers.insert(
                        sub.uid.clone(),
                        SolverRecord {
                            best_rt: rt,
                            first_accepted_at: sub.submitted_at,
                        },
                    );
                    changed = true;
                }
            }
        }
        Ok(changed)
    }

    fn compute_contributions(&self) -> BTreeMap<Uid, Contribution> {
        if !self.counts() || self.solvers.is_empty() {
            return BTreeMap::new();
        }
        contributions_for(&self.bps, &self.attempted, &self.solvers)
    }
}

fn contributions_for(
    bps: &Score,
    attempted: &BTreeSet<Uid>,
    solvers: &BTreeMap<Uid, SolverRecord>,
) -> BTreeMap<Uid, Contribution> {
    let ac = acceptance_rate(solvers.len() as u64, attempted.len() as u64)
        .expect("solvers imply attempts");
    let cs = challenge_score(bps, &ac);
    let mut runtimes: Vec<u64> = solvers.values().map(|r| r.best_rt).collect();
    runtimes.sort_unstable();
    let n = runtimes.len() as u64;
    solvers
        .iter()
        .map(|(uid, rec)| {
            let first_ge = runtimes.partition_point(|&rt| rt < rec.best_rt) as u64;
            let es = Score::ratio(n - first_ge, n);
            (uid.clone(), Contribution { cs: cs.clone(), es })
        })
        .collect()
}

/// Incrementally maintained ranking state.
#[derive(Debug, Clone, Default)]
pub struct Leaderboard {
    problems: BTreeMap<Pid, ProblemTally>,
    seen: HashSet<Sid>,
    dp: BTreeMap<Uid, Score>,
}

impl Leaderboard {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registers a problem or updates its score/status, re-scoring it.
    pub fn upsert_problem(&mut self, problem: &ScoredProblem) {
        let tally = self.problems.entry(problem.pid.clone()).or_default();
        if tally.status == Some(problem.status) && tally.bps == problem.bps {
            return;
        }
        tally.bps = problem.bps.clone();
        tally.status = Some(problem.status);
        self.rescore(&problem.pid);
    }

    /// Applies one judged submission. Returns `false` when it was already
    /// applied or does not affect scoring (e.g. `InternalError`).
    pub fn apply(&mut self, sub: &JudgedSubmission) -> Result<bool, ScoringError> {
        if self.seen.contains(&sub.sid) {
            return Ok(false);
        }
        let tally = self
            .problems
            .get_mut(&sub.pid)
            .ok_or_else(|| ScoringError::UnknownProblem(sub.pid.clone()))?;
        let changed = tally.absorb(sub)?;
        self.seen.insert(sub.sid.clone());
        if changed {
            self.dp.entry(sub.uid.clone()).or_insert_with(Score::zero);
            self.rescore(&sub.pid);
        }
        Ok(changed)
    }

    fn rescore(&mut self, pid: &str) {
        let tally = self.problems.get_mut(pid).expect("tally exists");
        let fresh = tally.compute_contributions();
        let old = std::mem::replace(&mut tally.contributions, fresh);
        for (uid, c) in &old {
            let dp = self.dp.entry(uid.clone()).or_insert_with(Score::zero);
            *dp -= &c.total();
        }
        for (uid, c) in &tally.contributions {
            let dp = self.dp.entry(uid.clone()).or_insert_with(Score::zero);
            *dp += &c.total();
        }
        for uid in &tally.attempted {
            self.dp.entry(uid.clone()).or_insert_with(Score::zero);
        }
    }

    pub fn stats(&self, pid: &str) -> Option<ProblemStats> {
        self.problems.get(pid).map(|t| ProblemStats {
            pid: pid.to_owned(),
            solved: t.solvers.len() as u64,
            total: t.attempted.len() as u64,
        })
    }

    /// Current dynamic points; `None` for users the ranking has never seen.
    pub fn dynamic_points(&self, uid: &str) -> Option<Score> {
        if !self.is_ranked(uid) {
            return None;
        }
        self.dp.get(uid).cloned()
    }

    fn is_ranked(&self, uid: &str) -> bool {
        self.problems
            .values()
            .any(|t| t.counts() && t.attempted.contains(uid))
    }

    /// Ordered ranking over every user who attempted a scoring problem.
    pub fn entries(&self) -> Vec<RankingEntry> {
        let active = self.problems.values().filter(|t| t.counts()).count() as u64;
        let mut users: BTreeMap<&Uid, RankingEntry> = BTreeMap::new();
        for (pid, tally) in self.problems.iter().filter(|(_, t)| t.counts()) {
            for uid in &tally.attempted {
                users.entry(uid).or_insert_with(|| RankingEntry {
                    uid: uid.clone(),
                    dp: self.dp.get(uid).cloned().unwrap_or_else(Score::zero),
                    solved: 0,
                    pass_rate: Score::zero(),
                    per_problem: BTreeMap::new(),
                    last_accepted_at: None,
                });
            }
            for (uid, c) in &tally.contributions {
                let entry = users.get_mut(uid).expect("solver attempted");
                entry.per_problem.insert(pid.clone(), c.clone());
                entry.solved += 1;
                let at = tally.solvers[uid].first_accepted_at;
                entry.last_accepted_at = Some(entry.last_accepted_at.map_or(at, |t| t.max(at)));
            }
        }
        let mut out: Vec<RankingEntry> = users
            .into_values()
            .map(|mut e| {
                if active > 0 {
                    e.pass_rate = Score::ratio(e.solved, active);
                }
                e
            })
            .collect();
        out.sort_by(ranking_order);
        out
    }

    /// Rebuilds from a full scoring input.
    pub fn from_input(problems: &[ScoredProblem], subs: &[JudgedSubmission]) -> Result<Self, ScoringError> {
        let mut lb = Leaderboard::new();
        for p in problems {
            lb.upsert_problem(p);
        }
        for s in subs {
            lb.apply(s)?;
        }
        Ok(lb)
    }
}

/// From-scratch ranking over the whole store. Per-problem scoring runs
/// under `mode`; the result is identical in both modes.
pub fn recompute_ranking(
    problems: &[ScoredProblem],
    subs: &[JudgedSubmission],
    mode: ExecMode,
) -> Vec<RankingEntry> {
    let mut by_problem: BTreeMap<&str, Vec<&JudgedSubmission>> = BTreeMap::new();
    for s in subs.iter().filter(|s| s.verdict.counts_as_attempt()) {
        by_problem.entry(s.pid.as_str()).or_default().push(s);
    }
    let scoring: Vec<&ScoredProblem> = problems
        .iter()
        .filter(|p| p.status.counts_for_scoring())
        .collect();
    let active = scoring.len() as u64;

    let per_problem = parallel::map(mode, &scoring, |p| {
        let subs = by_problem.get(p.pid.as_str()).map(Vec::as_slice).unwrap_or(&[]);
        let mut attempted = BTreeSet::new();
        let mut solvers: BTreeMap<Uid, SolverRecord> = BTreeMap::new();
        for s in subs {
            attempted.insert(s.uid.clone());
            if s.verdict == Verdict::Accepted {
                let rt = s.total_cpu_ms.unwrap_or(u64::MAX);
                solvers
                    .entry(s.uid.clone())
                    .and_modify(|r| {
                        r.best_rt = r.best_rt.min(rt);
                        r.first_accepted_at = r.first_accepted_at.min(s.submitted_at);
                    })
                    .or_insert(SolverRecord {
                        best_rt: rt,
                        first_accepted_at: s.submitted_at,
                    });
            }
        }
        let contributions = if solvers.is_empty() {
            BTreeMap::new()
        } else {
            contributions_for(&p.bps, &attempted, &solvers)
        };
        (p.pid.clone(), attempted, solvers, contributions)
    });

    let mut users: BTreeMap<Uid, RankingEntry> = BTreeMap::new();
    for (pid, attempted, solvers, contributions) in per_problem {
        for uid in attempted {
            users.entry(uid.clone()).or_insert_with(|| RankingEntry {
                uid,
                dp: Score::zero(),
                solved: 0,
                pass_rate: Score::zero(),
                per_problem: BTreeMap::new(),
                last_accepted_at: None,
            });
        }
        for (uid, c) in contributions {
            let entry = users.get_mut(&uid).expect("solver attempted");
            entry.dp += &c.total();
            entry.solved += 1;
            let at = solvers[&uid].first_accepted_at;
            entry.last_accepted_at = Some(entry.last_accepted_at.map_or(at, |t| t.max(at)));
            entry.per_problem.insert(pid.clone(), c);
        }
    }
    let mut out: Vec<RankingEntry> = users
        .into_values()
        .map(|mut e| {
            if active > 0 {
                e.pass_rate = Score::ratio(e.solved, active);
            }
            e
        })
        .collect();
    out.sort_by(ranking_order);
    out
}

/// Per-problem solver counts computed directly from submissions.
pub fn problem_stats(pid: &str, subs: &[JudgedSubmission]) -> ProblemStats {
    let mut attempted = BTreeSet::new();
    let mut solved = BTreeSet::new();
    for s in subs.iter().filter(|s| s.pid == pid && s.verdict.counts_as_attempt()) {
        attempted.insert(s.uid.as_str());
        if s.verdict == Verdict::Accepted {
            solved.insert(s.uid.as_str());
        }
    }
    ProblemStats {
        pid: pid.to_owned(),
        solved: solved.len() as u64,
        total: attempted.len() as u64,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::TimeZone;

    fn t(sec: i64) -> DateTime<Utc> {
        Utc.timestamp_opt(1_700_000_000 + sec, 0).unwrap()
    }

    fn prob(pid: &str, bps: i64) -> ScoredProblem {
        ScoredProblem {
            pid: pid.into(),
            bps: Score::from_integer(bps),
            status: ProblemStatus::Active,
        }
    }

    fn sub(sid: &str, uid: &str, pid: &str, verdict: Verdict, rt: Option<u64>, at: i64) -> JudgedSubmission {
        JudgedSubmission {
            sid: sid.into(),
            uid: uid.into(),
            pid: pid.into(),
            verdict,
            total_cpu_ms: rt,
            submitted_at: t(at),
        }
    }

    #[test]
    fn acceptance_rate_examples() {
        assert_eq!(acceptance_rate(3, 8), Some(Score::ratio(3, 8)));
        assert_eq!(acceptance_rate(3, 8).unwrap().to_f64(), 0.375);
        assert_eq!(acceptance_rate(0, 5), Some(Score::zero()));
        assert_eq!(acceptance_rate(5, 5), Some(Score::one()));
        assert_eq!(acceptance_rate(0, 0), None);
    }

    #[test]
    fn challenge_score_examples() {
        let five = Score::from_integer(5);
        assert_eq!(challenge_score(&five, &Score::one()), Score::zero());
        assert_eq!(challenge_score(&five, &Score::ratio(1, 4)), Score::ratio(15, 4));
        assert_eq!(challenge_score(&Score::zero(), &Score::ratio(1, 3)), Score::zero());
    }

    #[test]
    fn efficiency_score_examples() {
        let rts = [10, 20, 30, 40];
        assert_eq!(efficiency_score(10, &rts), Some(Score::one()));
        assert_eq!(efficiency_score(40, &rts), Some(Score::ratio(1, 4)));
        assert_eq!(efficiency_score(777, &[777]), Some(Score::one()));
        assert_eq!(efficiency_score(20, &[20, 20, 30]), Some(Score::one()));
        assert_eq!(efficiency_score(5, &rts), None);
        assert_eq!(efficiency_score(5, &[]), None);
    }

    #[test]
    fn dynamic_points_examples() {
        // Sole attempter and solver: CS = 0, ES = 1.
        let lb = Leaderboard::from_input(
            &[prob("p", 5)],
            &[sub("s1", "u1", "p", Verdict::Accepted, Some(100), 0)],
        )
        .unwrap();
        assert_eq!(lb.dynamic_points("u1"), Some(Score::one()));

        // Two attempters, one solver: AC = 1/2, CS = 2.5, ES = 1.
        let lb = Leaderboard::from_input(
            &[prob("p", 5)],
            &[
                sub("s1", "u1", "p", Verdict::Accepted, Some(100), 0),
                sub("s2", "u2", "p", Verdict::WrongAnswer, None, 1),
            ],
        )
        .unwrap();
        assert_eq!(lb.dynamic_points("u1"), Some(Score::ratio(7, 2)));
        assert_eq!(lb.dynamic_points("u2"), Some(Score::zero()));
        assert_eq!(lb.dynamic_points("nobody"), None);
    }

    #[test]
    fn wrong_answer_from_new_user_raises_cs() {
        let mut lb = Leaderboard::new();
        lb.upsert_problem(&prob("p", 4));
        lb.apply(&sub("s1", "a", "p", Verdict::Accepted, Some(10), 0)).unwrap();
        lb.apply(&sub("s2", "b", "p", Verdict::WrongAnswer, None, 1)).unwrap();
        let before = lb.dynamic_points("a").unwrap();
        lb.apply(&sub("s3", "c", "p", Verdict::WrongAnswer, None, 2)).unwrap();
        let stats = lb.stats("p").unwrap();
        assert_eq!((stats.solved, stats.total), (1, 3));
        assert!(lb.dynamic_points("a").unwrap() > before);
    }

    #[test]
    fn faster_accept_lowers_prior_es() {
        let mut lb = Leaderboard::new();
        lb.upsert_problem(&prob("p", 0));
        lb.apply(&sub("s1", "a", "p", Verdict::Accepted, Some(30), 0)).unwrap();
        lb.apply(&sub("s2", "b", "p", Verdict::Accepted, Some(20), 1)).unwrap();
        // a: 1/2, b: 1.
        assert_eq!(lb.dynamic_points("a"), Some(Score::ratio(1, 2)));
        lb.apply(&sub("s3", "c", "p", Verdict::Accepted, Some(5), 2)).unwrap();
        assert_eq!(lb.dynamic_points("a"), Some(Score::ratio(1, 3)));
        assert_eq!(lb.dynamic_points("b"), Some(Score::ratio(2, 3)));
        assert_eq!(lb.dynamic_points("c"), Some(Score::one()));
    }

    #[test]
    fn duplicate_and_internal_error_are_ignored() {
        let mut lb = Leaderboard::new();
        lb.upsert_problem(&prob("p", 5));
        let s = sub("s1", "a", "p", Verdict::Accepted, Some(30), 0);
        assert!(lb.apply(&s).unwrap());
        let once = lb.entries();
        assert!(!lb.apply(&s).unwrap());
        assert_eq!(lb.entries(), once);
        assert!(!lb.apply(&sub("s2", "b", "p", Verdict::InternalError, None, 1)).unwrap());
        assert_eq!(lb.stats("p").unwrap().total, 1);
        assert_eq!(lb.entries(), once);
    }

    #[test]
    fn rejects_bad_input() {
        let mut lb = Leaderboard::new();
        assert_eq!(
            lb.apply(&sub("s", "a", "zzz", Verdict::Accepted, Some(1), 0)),
            Err(ScoringError::UnknownProblem("zzz".into()))
        );
        lb.upsert_problem(&prob("p", 5));
        assert!(matches!(
            lb.apply(&sub("s", "a", "p", Verdict::Queued, None, 0)),
            Err(ScoringError::NotTerminal(_))
        ));
        assert!(matches!(
            lb.apply(&sub("s", "a", "p", Verdict::Accepted, None, 0)),
            Err(ScoringError::MissingRuntime(_))
        ));
    }

    #[test]
    fn retiring_removes_contribution() {
        let subs = [
            sub("s1", "a", "p", Verdict::Accepted, Some(3), 0),
            sub("s2", "a", "q", Verdict::Accepted, Some(3), 1),
            sub("s3", "b", "q", Verdict::WrongAnswer, None, 2),
        ];
        let mut lb = Leaderboard::from_input(&[prob("p", 5), prob("q", 5)], &subs).unwrap();
        assert_eq!(lb.dynamic_points("a"), Some(Score::ratio(9, 2)));
        let retired = ScoredProblem {
            status: ProblemStatus::Retired,
            ..prob("q", 5)
        };
        lb.upsert_problem(&retired);
        assert_eq!(lb.dynamic_points("a"), Some(Score::one()));
        assert_eq!(lb.dynamic_points("b"), None);
        let scratch = recompute_ranking(&[prob("p", 5), retired], &subs, ExecMode::Sequential);
        assert_eq!(lb.entries(), scratch);
        assert_eq!(scratch[0].pass_rate, Score::one());
    }

    #[test]
    fn ties_break_on_last_accept_then_uid() {
        let subs = [
            sub("s1", "b", "p", Verdict::Accepted, Some(3), 0),
            sub("s2", "a", "p", Verdict::Accepted, Some(3), 5),
            sub("s3", "d", "p", Verdict::WrongAnswer, None, 6),
            sub("s4", "c", "p", Verdict::WrongAnswer, None, 7),
        ];
        let lb = Leaderboard::from_input(&[prob("p", 5)], &subs).unwrap();
        let order: Vec<_> = lb.entries().into_iter().map(|e| e.uid).collect();
        assert_eq!(order, ["b", "a", "c", "d"]);
    }

    #[test]
    fn human_fastest_accept_represents_user() {
        let subs = [
            sub("s1", "h", "p", Verdict::Accepted, Some(50), 0),
            sub("s2", "m", "p", Verdict::Accepted, Some(30), 1),
            sub("s3", "h", "p", Verdict::Accepted, Some(10), 2),
            sub("s4", "h", "p", Verdict::WrongAnswer, None, 3),
        ];
        let lb = Leaderboard::from_input(&[prob("p", 2)], &subs).unwrap();
        assert_eq!(lb.dynamic_points("h"), Some(Score::one()));
        assert_eq!(lb.dynamic_points("m"), Some(Score::ratio(1, 2)));
        assert_eq!(lb.stats("p").unwrap(), ProblemStats { pid: "p".into(), solved: 2, total: 2 });
        assert_eq!(recompute_ranking(&[prob("p", 2)], &subs, ExecMode::Parallel), lb.entries());
    }

    #[test]
    fn stats_from_submissions() {
        let subs = [
            sub("s1", "a", "p", Verdict::Accepted, Some(1), 0),
            sub("s2", "b", "p", Verdict::CompileError, None, 0),
            sub("s3", "c", "p", Verdict::InternalError, None, 0),
            sub("s4", "a", "p", Verdict::WrongAnswer, None, 0),
        ];
        assert_eq!(problem_stats("p", &subs), ProblemStats { pid: "p".into(), solved: 1, total: 2 });
        assert_eq!(problem_stats("q", &subs).acceptance(), None);
    }
}
