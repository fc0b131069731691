//! Judging: output comparison, per-submission case execution, prompt
//! resolution and test-case generation.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::process::{Command, Stdio};
use std::sync::Arc;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::model::{
    CanonicalSolution, CaseOutcome, CaseResult, JudgeOutcome, Problem, Submission, SubmissionMode, TestCase, Verdict,
};
use crate::parallel::{self, ExecMode};
use crate::sandbox::{Artifact, CompileOutcome, RunLimits, RunResult, RunStatus, Sandbox, SandboxError};

pub const STDERR_EXCERPT_CHARS: usize = 4096;

/// Whitespace-tolerant comparison: when both sides are UTF-8, trailing
/// whitespace on each line and trailing blank lines are ignored. Anything
/// else must match byte for byte.
pub fn compare_output(actual: &[u8], expected: &[u8]) -> bool {
    match (std::str::from_utf8(actual), std::str::from_utf8(expected)) {
        (Ok(a), Ok(e)) => normalized_lines(a).eq(normalized_lines(e)),
        _ => actual == expected,
    }
}

fn normalized_lines(text: &str) -> impl Iterator<Item = &str> {
    let lines: Vec<&str> = text.lines().map(str::trim_end).collect();
    let keep = lines.iter().rposition(|l| !l.is_empty()).map_or(0, |i| i + 1);
    lines.into_iter().take(keep)
}

/// A program that prints one test input for the seed given as its only
/// argument.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeneratorProgram {
    pub language: String,
    pub source: String,
}

// ---- prompt backends ------------------------------------------------------

#[derive(Debug, Clone)]
pub struct GenerationRequest<'a> {
    pub prompt: &'a str,
    pub pid: &'a str,
    pub language: &'a str,
    /// Reference solutions of the problem in `language`. Only the mock
    /// backend looks at these.
    pub references: &'a [CanonicalSolution],
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum BackendError {
    #[error("backend {0} is not configured")]
    Unknown(String),
    #[error("no solution available for problem {0}")]
    NoSolution(String),
    #[error("backend failed: {0}")]
    Failed(String),
}

/// Turns a prompt into source code.
pub trait GeneratorBackend: Send + Sync {
    fn id(&self) -> &str;
    fn resolve(&self, req: &GenerationRequest<'_>) -> Result<String, BackendError>;
}

/// Deterministic stand-in for a model. Picks one of a fixed set of sources
/// by a digest of the prompt and problem id: the configured fixtures for
/// the problem when there are any, otherwise the problem's own reference
/// solutions in the requested language.
#[derive(Debug, Clone, Default)]
pub struct MockBackend {
    id: String,
    fixtures: HashMap<String, Vec<String>>,
}

impl MockBackend {
    pub fn new(id: impl Into<String>) -> Self {
        MockBackend {
            id: id.into(),
            fixtures: HashMap::new(),
        }
    }

    pub fn with_fixtures(mut self, pid: impl Into<String>, sources: Vec<String>) -> Self {
        self.fixtures.insert(pid.into(), sources);
        self
    }

    fn pick<'a>(prompt: &str, pid: &str, options: &[&'a str]) -> Option<&'a str> {
        if options.is_empty() {
            return None;
        }
        let mut h = Sha256::new();
        h.update((prompt.len() as u64).to_le_bytes());
        h.update(prompt.as_bytes());
        h.update(pid.as_bytes());
        let digest = h.finalize();
        let n = u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"));
        Some(options[(n % options.len() as u64) as usize])
    }
}

impl GeneratorBackend for MockBackend {
    fn id(&self) -> &str {
        &self.id
    }

    fn resolve(&self, req: &GenerationRequest<'_>) -> Result<String, BackendError> {
        let options: Vec<&str> = match self.fixtures.get(req.pid) {
            Some(list) if !list.is_empty() => list.iter().map(String::as_str).collect(),
            _ => req
                .references
                .iter()
                .filter(|c| c.language == req.language)
                .map(|c| c.source.as_str())
                .collect(),
        };
        Self::pick(req.prompt, req.pid, &options)
            .map(str::to_owned)
            .ok_or_else(|| BackendError::NoSolution(req.pid.to_owned()))
    }
}

/// Always fails. Useful for exercising the InternalError path.
#[derive(Debug, Clone)]
pub struct FailingBackend {
    id: String,
    message: String,
}

impl FailingBackend {
    pub fn new(id: impl Into<String>, message: impl Into<String>) -> Self {
        FailingBackend {
            id: id.into(),
            message: message.into(),
        }
    }
}

impl GeneratorBackend for FailingBackend {
    fn id(&self) -> &str {
        &self.id
    }

    fn resolve(&self, _req: &GenerationRequest<'_>) -> Result<String, BackendError> {
        Err(BackendError::Failed(self.message.clone()))
    }
}

/// Runs a host command (e.g. a wrapper around a locally served model). The
/// request goes to stdin as one JSON object; stdout is the code.
#[derive(Debug, Clone)]
pub struct CommandBackend {
    id: String,
    argv: Vec<String>,
    timeout: Duration,
}

impl CommandBackend {
    pub fn new(id: impl Into<String>, argv: Vec<String>, timeout: Duration) -> Self {
        CommandBackend {
            id: id.into(),
            argv,
            timeout,
        }
    }
}

impl GeneratorBackend for CommandBackend {
    fn id(&self) -> &str {
        &self.id
    }

    fn resolve(&self, req: &GenerationRequest<'_>) -> Result<String, BackendError> {
        let (program, args) = self
            .argv
            .split_first()
            .ok_or_else(|| BackendError::Failed("empty command".into()))?;
        let payload = serde_json::json!({
            "prompt": req.prompt,
            "pid": req.pid,
            "language": req.language,
        })
        .to_string();
        let mut child = Command::new(program)
            .args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()
            .map_err(|e| BackendError::Failed(format!("spawn {program}: {e}")))?;
        let mut stdin = child.stdin.take().expect("piped");
        let writer = std::thread::spawn(move || stdin.write_all(payload.as_bytes()));
        let mut stdout = child.stdout.take().expect("piped");
        let reader = std::thread::spawn(move || {
            let mut buf = Vec::new();
            stdout.read_to_end(&mut buf).map(|_| buf)
        });
        let start = Instant::now();
        let status = loop {
            match child.try_wait() {
                Ok(Some(status)) => break status,
                Ok(None) if start.elapsed() > self.timeout => {
                    let _ = child.kill();
                    let _ = child.wait();
                    return Err(BackendError::Failed("timed out".into()));
                }
                Ok(None) => std::thread::sleep(Duration::from_millis(10)),
                Err(e) => return Err(BackendError::Failed(e.to_string())),
            }
        };
        let _ = writer.join();
        let out = reader
            .join()
            .map_err(|_| BackendError::Failed("reader panicked".into()))?
            .map_err(|e| BackendError::Failed(e.to_string()))?;
        if !status.success() {
            let mut err = String::new();
            if let Some(mut e) = child.stderr.take() {
                let _ = e.read_to_string(&mut err);
            }
            return Err(BackendError::Failed(format!("{status}: {}", err.trim())));
        }
        String::from_utf8(out).map_err(|_| BackendError::Failed("output is not UTF-8".into()))
    }
}

#[derive(Default, Clone)]
pub struct BackendRegistry {
    backends: HashMap<String, Arc<dyn GeneratorBackend>>,
}

impl std::fmt::Debug for BackendRegistry {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_list().entries(self.backends.keys()).finish()
    }
}

impl BackendRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, backend: Arc<dyn GeneratorBackend>) {
        self.backends.insert(backend.id().to_owned(), backend);
    }

    pub fn get(&self, id: &str) -> Option<Arc<dyn GeneratorBackend>> {
        self.backends.get(id).cloned()
    }

    pub fn contains(&self, id: &str) -> bool {
        self.backends.contains_key(id)
    }
}

/// Resolves a prompt-mode submission to code. Code-mode submissions pass
/// through untouched.
pub fn resolve_prompt(
    sub: &Submission,
    problem: &Problem,
    backend: Option<&dyn GeneratorBackend>,
) -> Result<String, BackendError> {
    match sub.mode {
        SubmissionMode::Code => Ok(sub.source.clone()),
        SubmissionMode::Prompt => {
            let backend = backend.ok_or_else(|| BackendError::Unknown("(none)".into()))?;
            backend.resolve(&GenerationRequest {
                prompt: &sub.source,
                pid: &sub.pid,
                language: &sub.language,
                references: &problem.canonical_solutions,
            })
        }
    }
}

// ---- judging ----------------------------------------------------------------

pub fn problem_limits(problem: &Problem) -> RunLimits {
    RunLimits::new(problem.cpu_limit_ms, problem.memory_limit_kib)
}

fn internal_error(detail: impl Into<String>, resolved_code: Option<String>) -> JudgeOutcome {
    JudgeOutcome {
        verdict: Verdict::InternalError,
        case_results: Vec::new(),
        peak_memory_kib: 0,
        resolved_code,
        detail: Some(detail.into()),
    }
}

enum Compiled {
    Ready(Artifact),
    Rejected(String),
    Broken(String),
}

/// Compiles with one retry on host-side failure.
fn compile_with_retry(sandbox: &Sandbox, language: &str, source: &str) -> Compiled {
    let mut last = String::new();
    for attempt in 0..2 {
        match sandbox.compile(language, source) {
            Ok(CompileOutcome::Compiled(a)) => return Compiled::Ready(a),
            Ok(CompileOutcome::Failed { log }) => return Compiled::Rejected(log),
            Ok(CompileOutcome::SetupFailure(msg)) => {
                tracing::warn!(language, attempt, error = %msg, "compile setup failure");
                last = msg;
            }
            Err(e @ SandboxError::UnknownLanguage(_)) => return Compiled::Broken(e.to_string()),
            Err(e) => {
                tracing::warn!(language, attempt, error = %e, "compile setup failure");
                last = e.to_string();
            }
        }
    }
    Compiled::Broken(last)
}

fn execute_with_retry(sandbox: &Sandbox, artifact: &Artifact, input: &[u8], limits: &RunLimits) -> RunResult {
    let first = sandbox.execute(artifact, input, limits);
    if !first.is_setup_failure() {
        return first;
    }
    tracing::warn!(status = ?first.status, "run setup failure, retrying");
    sandbox.execute(artifact, input, limits)
}

/// Maps one run to a case outcome. `None` means the host failed.
pub fn classify_run(result: &RunResult, expected: &[u8]) -> Option<CaseOutcome> {
    Some(match &result.status {
        RunStatus::Ok if !result.stdout_truncated && compare_output(&result.stdout, expected) => CaseOutcome::Pass,
        RunStatus::Ok => CaseOutcome::Fail,
        RunStatus::Timeout => CaseOutcome::Timeout,
        RunStatus::MemoryExceeded => CaseOutcome::MemoryExceeded,
        RunStatus::NonzeroExit(_) | RunStatus::Killed(_) => CaseOutcome::Crash,
        RunStatus::SetupFailure(_) => return None,
    })
}

/// Runs `code` against `cases` in order, stopping at the first failure.
pub fn run_cases(
    sandbox: &Sandbox,
    language: &str,
    code: &str,
    cases: &[TestCase],
    limits: &RunLimits,
) -> JudgeOutcome {
    if cases.is_empty() {
        return internal_error("problem has no test cases", None);
    }
    let artifact = match compile_with_retry(sandbox, language, code) {
        Compiled::Ready(a) => a,
        Compiled::Rejected(log) => {
            return JudgeOutcome {
                verdict: Verdict::CompileError,
                case_results: Vec::new(),
                peak_memory_kib: 0,
                resolved_code: None,
                detail: Some(log),
            }
        }
        Compiled::Broken(msg) => return internal_error(msg, None),
    };

    let mut results = Vec::with_capacity(cases.len());
    let mut peak = 0;
    for case in cases {
        let run = execute_with_retry(sandbox, &artifact, &case.input, limits);
        let Some(outcome) = classify_run(&run, &case.expected_output) else {
            let msg = match run.status {
                RunStatus::SetupFailure(m) => m,
                _ => unreachable!(),
            };
            return internal_error(format!("sandbox failure on case {}: {msg}", case.case_id), None);
        };
        peak = peak.max(run.peak_memory_kib);
        results.push(CaseResult {
            case_id: case.case_id.clone(),
            outcome,
            cpu_ms: run.cpu_ms,
            memory_kib: run.peak_memory_kib,
            stderr_excerpt: run.stderr_excerpt(STDERR_EXCERPT_CHARS),
        });
        if outcome != CaseOutcome::Pass {
            break;
        }
    }
    let verdict = results
        .last()
        .map_or(Verdict::Accepted, |r| r.outcome.failure_verdict());
    JudgeOutcome {
        verdict,
        case_results: results,
        peak_memory_kib: peak,
        resolved_code: None,
        detail: None,
    }
}

/// Judges one submission end to end: prompt resolution, compilation and
/// fail-fast execution against the problem's cases.
pub fn judge_submission(
    sandbox: &Sandbox,
    backend: Option<&dyn GeneratorBackend>,
    sub: &Submission,
    problem: &Problem,
    cases: &[TestCase],
) -> JudgeOutcome {
    let code = match resolve_prompt(sub, problem, backend) {
        Ok(code) => code,
        Err(e) => {
            tracing::warn!(sid = %sub.sid, error = %e, "prompt resolution failed");
            return internal_error(e.to_string(), None);
        }
    };
    let mut outcome = run_cases(sandbox, &sub.language, &code, cases, &problem_limits(problem));
    if sub.mode == SubmissionMode::Prompt {
        outcome.resolved_code = Some(code);
    }
    outcome
}

// ---- case generation --------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GeneratedCase {
    pub seed: u64,
    pub input: Vec<u8>,
    pub expected_output: Vec<u8>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct GenerationReport {
    pub cases: Vec<GeneratedCase>,
    /// Seeds on which canonical solutions disagreed.
    pub disagreements: Vec<u64>,
    /// Seeds dropped because the generator or a canonical solution failed.
    pub skipped: Vec<u64>,
}

fn compile_all(sandbox: &Sandbox, solutions: &[CanonicalSolution], pid: &str) -> Result<Vec<Artifact>> {
    solutions
        .iter()
        .enumerate()
        .map(|(i, c)| match compile_with_retry(sandbox, &c.language, &c.source) {
            Compiled::Ready(a) => Ok(a),
            Compiled::Rejected(log) => Err(Error::Invalid(format!(
                "canonical solution {i} of {pid} does not compile: {log}"
            ))),
            Compiled::Broken(msg) => Err(Error::Inconclusive(msg)),
        })
        .collect()
}

enum InputVerdict {
    Agreed(Vec<u8>),
    Disagreed,
    Failed(String),
}

/// Runs every canonical artifact on `input` and checks that they agree.
fn check_agreement(sandbox: &Sandbox, canon: &[Artifact], input: &[u8], limits: &RunLimits) -> InputVerdict {
    let mut reference: Option<Vec<u8>> = None;
    for (i, art) in canon.iter().enumerate() {
        let run = execute_with_retry(sandbox, art, input, limits);
        if run.status != RunStatus::Ok || run.stdout_truncated {
            return InputVerdict::Failed(format!("canonical solution {i}: {:?}", run.status));
        }
        match &reference {
            None => reference = Some(run.stdout),
            Some(r) if compare_output(&run.stdout, r) => {}
            Some(_) => return InputVerdict::Disagreed,
        }
    }
    reference.map_or(InputVerdict::Failed("no canonical solutions".into()), InputVerdict::Agreed)
}

/// Generates up to `n` cases from seeds `seed0..seed0+n`. Seeds are
/// independent and run under `mode`; the report lists them in seed order.
pub fn generate_cases(
    sandbox: &Sandbox,
    problem: &Problem,
    generator: &GeneratorProgram,
    n: u64,
    seed0: u64,
    mode: ExecMode,
) -> Result<GenerationReport> {
    if problem.canonical_solutions.is_empty() {
        return Err(Error::Invalid(format!("problem {} has no canonical solution", problem.pid)));
    }
    if n == 0 {
        return Ok(GenerationReport::default());
    }
    let gen = match compile_with_retry(sandbox, &generator.language, &generator.source) {
        Compiled::Ready(a) => a,
        Compiled::Rejected(log) => return Err(Error::Invalid(format!("generator does not compile: {log}"))),
        Compiled::Broken(msg) => return Err(Error::Inconclusive(msg)),
    };
    let canon = compile_all(sandbox, &problem.canonical_solutions, &problem.pid)?;
    let limits = problem_limits(problem);
    let gen_limits = RunLimits::default();

    let outcomes = parallel::map_range(mode, 0, n, |k| {
        let seed = seed0.wrapping_add(k);
        let run = sandbox.execute_with_args(&gen, &[seed.to_string()], &[], &gen_limits);
        if run.status != RunStatus::Ok || run.stdout_truncated {
            return (seed, None, InputVerdict::Failed(format!("generator: {:?}", run.status)));
        }
        let verdict = check_agreement(sandbox, &canon, &run.stdout, &limits);
        (seed, Some(run.stdout), verdict)
    });

    let mut report = GenerationReport::default();
    for (seed, input, verdict) in outcomes {
        match verdict {
            InputVerdict::Agreed(out) => report.cases.push(GeneratedCase {
                seed,
                input: input.expect("agreement implies input"),
                expected_output: out,
            }),
            InputVerdict::Disagreed => {
                tracing::warn!(event = "disagreement", pid = %problem.pid, seed, "canonical solutions disagree");
                report.disagreements.push(seed);
            }
            InputVerdict::Failed(reason) => {
                tracing::warn!(event = "seed_skipped", pid = %problem.pid, seed, %reason, "seed skipped");
                report.skipped.push(seed);
            }
        }
    }
    if report.cases.is_empty() {
        if !report.disagreements.is_empty() {
            return Err(Error::Ambiguous {
                pid: problem.pid.clone(),
                disagreements: report.disagreements.len(),
            });
        }
        return Err(Error::Inconclusive(format!(
            "no usable cases from {n} seeds for {}",
            problem.pid
        )));
    }
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FilterDecision {
    Keep,
    MarkAmbiguous,
}

/// Decides whether the canonical solutions of `problem` agree. Inputs come
/// from `generator` over `sample_size` seeds when given, otherwise from the
/// first `sample_size` stored cases. Problems with a single canonical
/// solution are kept without running anything.
pub fn consistency_check(
    sandbox: &Sandbox,
    problem: &Problem,
    cases: &[TestCase],
    sample_size: u64,
    generator: Option<&GeneratorProgram>,
    seed0: u64,
    mode: ExecMode,
) -> Result<FilterDecision> {
    if problem.canonical_solutions.len() < 2 || sample_size == 0 {
        return Ok(FilterDecision::Keep);
    }
    if let Some(gen) = generator {
        return match generate_cases(sandbox, problem, gen, sample_size, seed0, mode) {
            Ok(r) if r.disagreements.is_empty() => Ok(FilterDecision::Keep),
            Ok(_) | Err(Error::Ambiguous { .. }) => Ok(FilterDecision::MarkAmbiguous),
            Err(e) => Err(e),
        };
    }
    let canon = compile_all(sandbox, &problem.canonical_solutions, &problem.pid)?;
    let limits = problem_limits(problem);
    let sample: Vec<&TestCase> = cases.iter().take(sample_size as usize).collect();
    let verdicts = parallel::map(mode, &sample, |c| check_agreement(sandbox, &canon, &c.input, &limits));
    let mut decision = FilterDecision::Keep;
    for (case, v) in sample.iter().zip(verdicts) {
        match v {
            InputVerdict::Agreed(_) => {}
            InputVerdict::Disagreed => {
                tracing::warn!(event = "disagreement", pid = %problem.pid, case = %case.case_id, "canonical solutions disagree");
                decision = FilterDecision::MarkAmbiguous;
            }
            InputVerdict::Failed(reason) => return Err(Error::Inconclusive(reason)),
        }
    }
    Ok(decision)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HealthIssue {
    pub pid: String,
    pub solution: usize,
    pub verdict: Verdict,
    pub detail: Option<String>,
}

/// Judges every canonical solution of `problem` against its own cases.
pub fn canonical_self_check(sandbox: &Sandbox, problem: &Problem, cases: &[TestCase]) -> Vec<HealthIssue> {
    let limits = problem_limits(problem);
    problem
        .canonical_solutions
        .iter()
        .enumerate()
        .filter_map(|(i, c)| {
            let out = run_cases(sandbox, &c.language, &c.source, cases, &limits);
            (out.verdict != Verdict::Accepted).then(|| HealthIssue {
                pid: problem.pid.clone(),
                solution: i,
                verdict: out.verdict,
                detail: out.detail.or_else(|| out.case_results.last().map(|r| r.case_id.clone())),
            })
        })
        .collect()
}
