mod support;

use std::collections::BTreeMap;

use arena_core::eval::{recompute_ranking, JudgedSubmission, Leaderboard, RankingEntry, ScoredProblem};
use arena_core::model::{ProblemStatus, Verdict};
use arena_core::parallel::ExecMode;
use arena_core::Score;
use chrono::{DateTime, TimeZone, Utc};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use support::oracle::{self, OProblem, OSub, Outcome};

const REJECTIONS: [Verdict; 5] = [
    Verdict::WrongAnswer,
    Verdict::TimeLimitExceeded,
    Verdict::MemoryLimitExceeded,
    Verdict::RuntimeError,
    Verdict::CompileError,
];

fn at(secs: i64) -> DateTime<Utc> {
    Utc.timestamp_opt(1_700_000_000 + secs, 0).unwrap()
}

struct Fixture {
    oproblems: Vec<OProblem>,
    osubs: Vec<OSub>,
    problems: Vec<ScoredProblem>,
    subs: Vec<JudgedSubmission>,
}

fn fixture(seed: u64) -> Fixture {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_problems = rng.gen_range(1..=6);
    let n_users = rng.gen_range(1..=8);
    let n_subs = rng.gen_range(0..=60);
    let statuses = [
        ProblemStatus::Active,
        ProblemStatus::Active,
        ProblemStatus::Active,
        ProblemStatus::Retired,
        ProblemStatus::Ambiguous,
        ProblemStatus::Draft,
    ];
    let mut oproblems = Vec::new();
    let mut problems = Vec::new();
    for i in 0..n_problems {
        let (num, den) = (rng.gen_range(0..=40), rng.gen_range(1..=8));
        let status = *statuses.choose(&mut rng).unwrap();
        oproblems.push(OProblem {
            pid: format!("p{i}"),
            bps: (num, den),
            scoring: status == ProblemStatus::Active,
        });
        problems.push(ScoredProblem {
            pid: format!("p{i}"),
            bps: Score::ratio(num as u64, den as u64),
            status,
        });
    }
    let mut osubs = Vec::new();
    let mut subs = Vec::new();
    for k in 0..n_subs {
        let uid = format!("u{}", rng.gen_range(0..n_users));
        let pid = format!("p{}", rng.gen_range(0..n_problems));
        let roll = rng.gen_range(0..10);
        let (outcome, verdict, rt) = if roll < 5 {
            // Narrow range so runtime ties are common.
            let rt = rng.gen_range(1..=12);
            (Outcome::Accepted(rt), Verdict::Accepted, Some(rt))
        } else if roll < 9 {
            (Outcome::Rejected, *REJECTIONS.choose(&mut rng).unwrap(), None)
        } else {
            (Outcome::HostFault, Verdict::InternalError, None)
        };
        osubs.push(OSub {
            uid: uid.clone(),
            pid: pid.clone(),
            outcome,
        });
        subs.push(JudgedSubmission {
            sid: format!("s{k:06}"),
            uid,
            pid,
            verdict,
            total_cpu_ms: rt,
            submitted_at: at(k as i64),
        });
    }
    Fixture {
        oproblems,
        osubs,
        problems,
        subs,
    }
}

fn dp_map(entries: &[RankingEntry]) -> BTreeMap<String, Score> {
    entries.iter().map(|e| (e.uid.clone(), e.dp.clone())).collect()
}

fn oracle_map(f: &Fixture) -> BTreeMap<String, Score> {
    oracle::dynamic_points(&f.oproblems, &f.osubs)
        .into_iter()
        .map(|(u, r)| (u, Score::from_rational(r)))
        .collect()
}

#[test]
fn randomized_fixtures_match_oracle_exactly() {
    for seed in 0..300 {
        let f = fixture(seed);
        let expected = oracle_map(&f);
        let seq = recompute_ranking(&f.problems, &f.subs, ExecMode::Sequential);
        let par = recompute_ranking(&f.problems, &f.subs, ExecMode::Parallel);
        let inc = Leaderboard::from_input(&f.problems, &f.subs).unwrap().entries();
        assert_eq!(dp_map(&seq), expected, "seed {seed}");
        assert_eq!(seq, par, "seed {seed}");
        assert_eq!(seq, inc, "seed {seed}");

        let solved = oracle::solved_counts(&f.oproblems, &f.osubs);
        let active = f.oproblems.iter().filter(|p| p.scoring).count() as u64;
        for e in &seq {
            let s = *solved.get(&e.uid).unwrap_or(&0) as u64;
            assert_eq!(e.solved, s, "seed {seed}");
            if active > 0 {
                assert_eq!(e.pass_rate, Score::ratio(s, active));
            }
        }
    }
}

#[test]
fn ranking_is_sorted_and_tie_broken() {
    for seed in 0..100 {
        let f = fixture(seed);
        let entries = recompute_ranking(&f.problems, &f.subs, ExecMode::Sequential);
        for w in entries.windows(2) {
            let (a, b) = (&w[0], &w[1]);
            assert!(a.dp >= b.dp, "seed {seed}");
            if a.dp == b.dp {
                match (a.last_accepted_at, b.last_accepted_at) {
                    (Some(x), Some(y)) => assert!(x < y || (x == y && a.uid < b.uid)),
                    (Some(_), None) => {}
                    (None, None) => assert!(a.uid < b.uid),
                    (None, Some(_)) => panic!("seed {seed}: unranked-by-time user ahead"),
                }
            }
        }
    }
}

#[test]
fn worked_example_values() {
    // Three of eight users solved; BPS 5.
    let ac = arena_core::eval::acceptance_rate(3, 8).unwrap();
    assert_eq!(ac, Score::ratio(3, 8));
    assert_eq!(arena_core::eval::challenge_score(&Score::from_integer(5), &ac), Score::ratio(25, 8));
    // Fastest of four solvers gets the full efficiency point, slowest a quarter.
    assert_eq!(arena_core::eval::efficiency_score(10, &[10, 20, 30, 40]), Some(Score::one()));
    assert_eq!(arena_core::eval::efficiency_score(40, &[10, 20, 30, 40]), Some(Score::ratio(1, 4)));
}

fn arb_subs() -> impl Strategy<Value = Vec<(u8, u8, u8, u64)>> {
    proptest::collection::vec((0u8..5, 0u8..4, 0u8..10, 1u64..20), 0..40)
}

fn build(raw: &[(u8, u8, u8, u64)]) -> (Vec<ScoredProblem>, Vec<JudgedSubmission>) {
    let problems = (0..4)
        .map(|i| ScoredProblem {
            pid: format!("p{i}"),
            bps: Score::from_integer(i as i64 + 1),
            status: ProblemStatus::Active,
        })
        .collect();
    let subs = raw
        .iter()
        .enumerate()
        .map(|(k, &(u, p, roll, rt))| {
            let verdict = match roll {
                0..=4 => Verdict::Accepted,
                5..=8 => REJECTIONS[roll as usize % REJECTIONS.len()],
                _ => Verdict::InternalError,
            };
            JudgedSubmission {
                sid: format!("s{k:06}"),
                uid: format!("u{u}"),
                pid: format!("p{p}"),
                verdict,
                total_cpu_ms: (verdict == Verdict::Accepted).then_some(rt),
                submitted_at: at(k as i64),
            }
        })
        .collect();
    (problems, subs)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn incremental_matches_recompute_in_any_order(raw in arb_subs(), shuffle_seed in any::<u64>()) {
        let (problems, subs) = build(&raw);
        let full = recompute_ranking(&problems, &subs, ExecMode::Sequential);
        let mut shuffled = subs.clone();
        shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(shuffle_seed));
        let mut lb = Leaderboard::new();
        for p in &problems {
            lb.upsert_problem(p);
        }
        for s in &shuffled {
            lb.apply(s).unwrap();
            // Re-applying is a no-op.
            prop_assert!(!lb.apply(s).unwrap());
        }
        prop_assert_eq!(lb.entries(), full);
    }

    #[test]
    fn efficiency_in_unit_interval_and_cs_bounded(raw in arb_subs()) {
        let (problems, subs) = build(&raw);
        for e in recompute_ranking(&problems, &subs, ExecMode::Sequential) {
            let mut total = Score::zero();
            for (pid, c) in &e.per_problem {
                prop_assert!(c.es > Score::zero() && c.es <= Score::one());
                let bps = &problems.iter().find(|p| &p.pid == pid).unwrap().bps;
                prop_assert!(!c.cs.is_negative() && &c.cs < bps);
                total += &c.total();
            }
            prop_assert_eq!(total, e.dp);
        }
    }

    #[test]
    fn host_faults_never_change_the_ranking(raw in arb_subs()) {
        let (problems, subs) = build(&raw);
        let clean: Vec<JudgedSubmission> =
            subs.iter().filter(|s| s.verdict != Verdict::InternalError).cloned().collect();
        prop_assert_eq!(
            recompute_ranking(&problems, &subs, ExecMode::Sequential),
            recompute_ranking(&problems, &clean, ExecMode::Sequential)
        );
    }

    #[test]
    fn repeat_rejections_leave_ranking_unchanged(raw in arb_subs(), pick in any::<prop::sample::Index>()) {
        let (problems, mut subs) = build(&raw);
        let attempted: Vec<(String, String)> = subs
            .iter()
            .filter(|s| s.verdict != Verdict::InternalError)
            .map(|s| (s.uid.clone(), s.pid.clone()))
            .collect();
        prop_assume!(!attempted.is_empty());
        let (uid, pid) = attempted[pick.index(attempted.len())].clone();
        let before = recompute_ranking(&problems, &subs, ExecMode::Sequential);
        subs.push(JudgedSubmission {
            sid: "s999999".into(),
            uid,
            pid,
            verdict: Verdict::WrongAnswer,
            total_cpu_ms: None,
            submitted_at: at(10_000),
        });
        prop_assert_eq!(recompute_ranking(&problems, &subs, ExecMode::Sequential), before);
    }

    #[test]
    fn a_new_failed_attempt_only_raises_solvers_challenge(raw in arb_subs(), p in 0u8..4) {
        let (problems, mut subs) = build(&raw);
        let before = recompute_ranking(&problems, &subs, ExecMode::Sequential);
        let pid = format!("p{p}");
        subs.push(JudgedSubmission {
            sid: "s999999".into(),
            uid: "newcomer".into(),
            pid: pid.clone(),
            verdict: Verdict::WrongAnswer,
            total_cpu_ms: None,
            submitted_at: at(10_000),
        });
        let after = recompute_ranking(&problems, &subs, ExecMode::Sequential);
        let newcomer = after.iter().find(|e| e.uid == "newcomer").unwrap();
        prop_assert_eq!(&newcomer.dp, &Score::zero());
        for e in &before {
            let a = after.iter().find(|x| x.uid == e.uid).unwrap();
            prop_assert!(a.dp >= e.dp);
            prop_assert_eq!(a.solved, e.solved);
            for (q, c) in &e.per_problem {
                if *q != pid {
                    prop_assert_eq!(&a.per_problem[q], c);
                }
            }
        }
    }

    #[test]
    fn retiring_removes_exactly_that_problem(raw in arb_subs(), p in 0u8..4) {
        let (mut problems, subs) = build(&raw);
        let before = recompute_ranking(&problems, &subs, ExecMode::Sequential);
        let pid = format!("p{p}");
        problems[p as usize].status = ProblemStatus::Retired;
        let after = dp_map(&recompute_ranking(&problems, &subs, ExecMode::Sequential));
        for e in &before {
            let lost = e.per_problem.get(&pid).map(|c| c.total()).unwrap_or_else(Score::zero);
            let now = after.get(&e.uid).cloned().unwrap_or_else(Score::zero);
            prop_assert_eq!(now, &e.dp - &lost);
        }
    }
}

#[test]
fn leakage_damps_challenge_score() {
    // A leaked problem that everyone solves is worth only the efficiency
    // point; a hard one keeps most of its base score.
    let problems = vec![
        ScoredProblem {
            pid: "leaked".into(),
            bps: Score::from_integer(5),
            status: ProblemStatus::Active,
        },
        ScoredProblem {
            pid: "hard".into(),
            bps: Score::from_integer(5),
            status: ProblemStatus::Active,
        },
    ];
    let mut subs = Vec::new();
    for u in 0..10 {
        subs.push(JudgedSubmission {
            sid: format!("s{u:03}"),
            uid: format!("u{u}"),
            pid: "leaked".into(),
            verdict: Verdict::Accepted,
            total_cpu_ms: Some(100),
            submitted_at: at(u),
        });
        subs.push(JudgedSubmission {
            sid: format!("s{:03}", 100 + u),
            uid: format!("u{u}"),
            pid: "hard".into(),
            verdict: if u == 0 { Verdict::Accepted } else { Verdict::WrongAnswer },
            total_cpu_ms: (u == 0).then_some(100),
            submitted_at: at(100 + u),
        });
    }
    let entries = recompute_ranking(&problems, &subs, ExecMode::Sequential);
    let u0 = entries.iter().find(|e| e.uid == "u0").unwrap();
    assert_eq!(u0.per_problem["leaked"].cs, Score::zero());
    assert_eq!(u0.per_problem["hard"].cs, Score::ratio(45, 10));
    assert_eq!(u0.dp, Score::from_integer(1) + Score::ratio(9, 2) + Score::one());
}
