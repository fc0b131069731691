use std::sync::Arc;
use std::time::Duration;

use arena_core::judge::{BackendRegistry, FailingBackend, FilterDecision, GeneratorProgram, MockBackend};
use arena_core::model::{GeneratorKind, NewSubmission, ProblemStatus, SubmissionMode, UserGroup, Verdict};
use arena_core::sandbox::{default_registry, Sandbox, SandboxConfig};
use arena_core::store::{Store, SubmissionFilter};
use arena_core::{Arena, ArenaOptions, Error, Score};
use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use serde_json::json;

const SUM: &str = "a, b = map(int, input().split())\nprint(a + b)\n";
const SUM_SLOW: &str = "a, b = map(int, input().split())\ns = 0\nfor _ in range(300000):\n    s += 1\nprint(a + b)\n";
const MAX: &str = "print(max(map(int, input().split())))\n";

fn record(pid: &str, canon: &[&str], cases: &[(&str, &str)]) -> String {
    json!({
        "pid": pid,
        "title": pid,
        "statement": "add",
        "bps": 5,
        "cpu_limit_ms": 2000,
        "memory_limit_kib": 131072,
        "canonical_solutions": canon.iter().map(|s| json!({"language": "python3", "source": s})).collect::<Vec<_>>(),
        "test_cases": cases.iter().map(|(i, o)| json!({"input": STANDARD.encode(i), "output": STANDARD.encode(o)})).collect::<Vec<_>>(),
    })
    .to_string()
}

fn arena_with(store: Arc<Store>, backends: BackendRegistry) -> Arena {
    let sandbox = Arc::new(Sandbox::new(SandboxConfig::default(), default_registry()).unwrap());
    Arena::start(store, sandbox, backends, ArenaOptions::default()).unwrap()
}

fn submit(arena: &Arena, uid: &str, pid: &str, source: &str) -> Result<String, Error> {
    arena
        .submit(NewSubmission {
            pid: pid.into(),
            uid: uid.into(),
            language: "python3".into(),
            mode: SubmissionMode::Code,
            source: source.into(),
        })
        .map(|s| s.sid)
}

#[test]
fn import_filter_judge_rank() {
    let store = Arc::new(Store::in_memory());
    let arena = arena_with(store.clone(), BackendRegistry::new());
    let archive = [
        record("sum", &[SUM, SUM_SLOW], &[("1 2\n", "3\n"), ("10 20\n", "30\n")]),
        record("max", &[MAX], &[("1 9 3\n", "9\n")]),
        record("amb", &[SUM, "print(0)\n"], &[("1 2\n", "3\n")]),
    ]
    .join("\n");
    let report = arena.import(&archive).unwrap();
    assert_eq!(report.accepted, 3);

    assert_eq!(arena.consistency_filter("sum", 10, None).unwrap(), FilterDecision::Keep);
    assert_eq!(arena.consistency_filter("max", 10, None).unwrap(), FilterDecision::Keep);
    assert_eq!(arena.consistency_filter("amb", 10, None).unwrap(), FilterDecision::MarkAmbiguous);
    assert_eq!(store.problem("sum").unwrap().status, ProblemStatus::Active);
    assert_eq!(store.problem("amb").unwrap().status, ProblemStatus::Ambiguous);
    assert!(arena.health_check().is_empty());

    let alice = store.create_user("alice", "pw", UserGroup::Generator, GeneratorKind::Human, None).unwrap();
    let bob = store.create_user("bob", "pw", UserGroup::Generator, GeneratorKind::Human, None).unwrap();
    let carol = store.create_user("carol", "pw", UserGroup::Generator, GeneratorKind::Human, None).unwrap();

    assert!(matches!(submit(&arena, &alice.uid, "amb", SUM), Err(Error::NotJudgeable(_))));
    submit(&arena, &alice.uid, "sum", SUM).unwrap();
    submit(&arena, &bob.uid, "sum", SUM_SLOW).unwrap();
    submit(&arena, &carol.uid, "sum", "print(1)\n").unwrap();
    submit(&arena, &alice.uid, "max", MAX).unwrap();
    assert!(arena.wait_idle(Duration::from_secs(120)));

    let subs = store.list_submissions(&SubmissionFilter::default());
    assert_eq!(subs.len(), 4);
    assert!(subs.iter().all(|s| s.verdict.is_terminal()));

    let stats = arena.problem_stats("sum").unwrap();
    assert_eq!((stats.solved, stats.total), (2, 3));

    let ranking = arena.ranking();
    assert_eq!(ranking[0].uid, alice.uid);
    // sum: CS = 5 * (1 - 2/3) = 5/3 for both solvers; alice is faster so
    // ES = 1, bob ES = 1/2. max: alice alone, CS 0, ES 1.
    let alice_entry = &ranking[0];
    assert_eq!(alice_entry.dp, Score::ratio(5, 3) + Score::one() + Score::one());
    let bob_entry = ranking.iter().find(|e| e.uid == bob.uid).unwrap();
    assert_eq!(bob_entry.dp, Score::ratio(5, 3) + Score::ratio(1, 2));
    let carol_entry = ranking.iter().find(|e| e.uid == carol.uid).unwrap();
    assert_eq!(carol_entry.dp, Score::zero());

    let cp = arena.checkpoint().unwrap();
    assert!(cp.audit_matched);
    assert_eq!(cp.entries, ranking);

    arena.set_status("max", ProblemStatus::Retired).unwrap();
    let after = arena.ranking();
    let alice_after = after.iter().find(|e| e.uid == alice.uid).unwrap();
    assert_eq!(alice_after.dp, Score::ratio(5, 3) + Score::one());
    assert_eq!(store.checkpoint(&cp.checkpoint_id).unwrap(), cp);
    assert!(arena.shutdown(Duration::from_secs(5)));
}

#[test]
fn generated_cases_and_ambiguity() {
    let store = Arc::new(Store::in_memory());
    let arena = arena_with(store.clone(), BackendRegistry::new());
    let diverging = "a, b = map(int, input().split())\nprint(a + b if b else -1)\n";
    arena
        .import(&[record("g", &[SUM], &[]), record("d", &[SUM, diverging], &[])].join("\n"))
        .unwrap();
    let gen = GeneratorProgram {
        language: "python3".into(),
        source: "import sys\ns = int(sys.argv[1])\nprint(s, s % 3)\n".into(),
    };
    let ids = arena.generate_cases("g", &gen, 5, 1).unwrap();
    assert_eq!(ids.len(), 5);
    for c in store.cases("g").unwrap() {
        // Every stored expected output is what the canonical solution prints.
        let text = String::from_utf8(c.input.clone()).unwrap();
        let nums: Vec<u64> = text.split_whitespace().map(|x| x.parse().unwrap()).collect();
        assert_eq!(c.expected_output, format!("{}\n", nums[0] + nums[1]).into_bytes());
    }
    assert_eq!(arena.consistency_filter("g", 5, Some(&gen)).unwrap(), FilterDecision::Keep);
    assert_eq!(store.problem("g").unwrap().status, ProblemStatus::Active);

    assert!(matches!(arena.generate_cases("d", &gen, 6, 1), Err(Error::Ambiguous { .. })));
    assert_eq!(store.problem("d").unwrap().status, ProblemStatus::Ambiguous);
    assert!(store.cases("d").unwrap().is_empty());
}

#[test]
fn single_attempt_refunded_on_internal_error() {
    let store = Arc::new(Store::in_memory());
    let mut backends = BackendRegistry::new();
    backends.insert(Arc::new(FailingBackend::new("down", "model offline")));
    backends.insert(Arc::new(MockBackend::new("mock")));
    let arena = arena_with(store.clone(), backends);
    arena.import(&record("sum", &[SUM], &[("1 2\n", "3\n")])).unwrap();
    arena.consistency_filter("sum", 5, None).unwrap();

    let flaky = store
        .create_user("flaky", "pw", UserGroup::Generator, GeneratorKind::Machine, Some("down".into()))
        .unwrap();
    let sid = arena
        .submit(NewSubmission {
            pid: "sum".into(),
            uid: flaky.uid.clone(),
            language: "python3".into(),
            mode: SubmissionMode::Prompt,
            source: "add two numbers".into(),
        })
        .unwrap()
        .sid;
    assert!(arena.wait_idle(Duration::from_secs(60)));
    assert_eq!(store.submission(&sid).unwrap().verdict, Verdict::InternalError);
    assert_eq!(arena.problem_stats("sum").unwrap().total, 0);

    // The failed attempt does not consume the single attempt.
    submit(&arena, &flaky.uid, "sum", "print(0)\n").unwrap();
    assert!(arena.wait_idle(Duration::from_secs(60)));
    assert!(matches!(submit(&arena, &flaky.uid, "sum", SUM), Err(Error::AttemptExhausted(_))));

    let bot = store
        .create_user("bot", "pw", UserGroup::Generator, GeneratorKind::Machine, Some("mock".into()))
        .unwrap();
    let sid = arena
        .submit(NewSubmission {
            pid: "sum".into(),
            uid: bot.uid.clone(),
            language: "python3".into(),
            mode: SubmissionMode::Prompt,
            source: "add two numbers".into(),
        })
        .unwrap()
        .sid;
    assert!(arena.wait_idle(Duration::from_secs(60)));
    let sub = store.submission(&sid).unwrap();
    assert_eq!(sub.verdict, Verdict::Accepted);
    assert_eq!(sub.resolved_code.as_deref(), Some(SUM));
}

#[test]
fn pending_work_survives_restart() {
    let dir = tempfile::tempdir().unwrap();
    let uid;
    let sid;
    {
        let store = Arc::new(Store::open(dir.path()).unwrap());
        let sandbox = Arc::new(Sandbox::new(SandboxConfig::default(), default_registry()).unwrap());
        let arena = Arena::start(store.clone(), sandbox, BackendRegistry::new(), ArenaOptions::default()).unwrap();
        arena.import(&record("sum", &[SUM], &[("1 2\n", "3\n")])).unwrap();
        arena.consistency_filter("sum", 1, None).unwrap();
        uid = store.create_user("u", "pw", UserGroup::Generator, GeneratorKind::Human, None).unwrap().uid;
        // Stop the workers first so the submission stays queued.
        assert!(arena.shutdown(Duration::from_secs(5)));
        sid = store
            .record_submission(NewSubmission {
                pid: "sum".into(),
                uid: uid.clone(),
                language: "python3".into(),
                mode: SubmissionMode::Code,
                source: SUM.into(),
            })
            .unwrap()
            .sid;
    }
    let store = Arc::new(Store::open(dir.path()).unwrap());
    assert_eq!(store.submission(&sid).unwrap().verdict, Verdict::Queued);
    let arena = arena_with(store.clone(), BackendRegistry::new());
    assert!(arena.wait_idle(Duration::from_secs(60)));
    assert_eq!(store.submission(&sid).unwrap().verdict, Verdict::Accepted);
    assert_eq!(arena.ranking()[0].uid, uid);
}
