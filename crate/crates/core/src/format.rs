//! Line-delimited problem archives.
//!
//! One JSON object per line, one problem per object. Test-case bytes are
//! base64. The export layout is the import layout plus a `submissions`
//! array, so an export can be fed straight back into an import.

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::bytes_b64;
use crate::model::{
    CanonicalSolution, CaseResult, Difficulty, Problem, ProblemStatus, Submission, SubmissionMode,
    TestCase, Verdict,
};
use crate::score::Score;

pub const DEFAULT_BPS: &str = "5";
pub const DEFAULT_CPU_LIMIT_MS: u64 = 2000;
pub const DEFAULT_MEMORY_LIMIT_KIB: u64 = 262_144;

/// A validated import record: the problem (as a draft) and its explicit cases.
#[derive(Debug, Clone, PartialEq)]
pub struct ImportRecord {
    pub problem: Problem,
    /// `(input, expected_output)` pairs in file order.
    pub cases: Vec<(Vec<u8>, Vec<u8>)>,
}

/// Whole-archive failure: the document is not a sequence of JSON objects.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("malformed archive at line {line}: {message}")]
pub struct MalformedArchive {
    pub line: usize,
    pub message: String,
}

/// Per-record failure.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rejection {
    /// Empty when the record has no usable `pid`.
    pub pid: String,
    pub line: usize,
    pub reason: String,
}

/// Result of parsing an archive before it touches the store.
#[derive(Debug, Clone, PartialEq)]
pub struct ParsedArchive {
    pub records: Vec<(usize, ImportRecord)>,
    pub rejected: Vec<Rejection>,
}

/// Splits `text` into records. Syntax errors reject the whole archive;
/// schema errors reject only their record.
pub fn parse_archive(text: &str) -> Result<ParsedArchive, MalformedArchive> {
    let mut objects = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let value: Value = serde_json::from_str(raw).map_err(|e| MalformedArchive {
            line,
            message: e.to_string(),
        })?;
        match value {
            Value::Object(map) => objects.push((line, map)),
            other => {
                return Err(MalformedArchive {
                    line,
                    message: format!("expected an object, found {}", json_kind(&other)),
                })
            }
        }
    }

    let mut records = Vec::new();
    let mut rejected = Vec::new();
    for (line, map) in objects {
        match parse_record(&map) {
            Ok(record) => records.push((line, record)),
            Err(reason) => rejected.push(Rejection {
                pid: map.get("pid").and_then(Value::as_str).unwrap_or("").to_owned(),
                line,
                reason,
            }),
        }
    }
    Ok(ParsedArchive { records, rejected })
}

/// Validates a single problem document (the body of a problem-creation
/// request uses the same schema as an archive line).
pub fn parse_record_value(value: &Value) -> Result<ImportRecord, String> {
    match value {
        Value::Object(map) => parse_record(map),
        other => Err(format!("expected an object, found {}", json_kind(other))),
    }
}

fn parse_record(map: &Map<String, Value>) -> Result<ImportRecord, String> {
    let pid = required_str(map, "pid")?;
    if pid.trim().is_empty() || pid.contains('/') {
        return Err("invalid field pid: must be non-empty and contain no '/'".into());
    }
    let title = required_str(map, "title")?;
    let statement = required_str(map, "statement")?;

    let difficulty = match map.get("difficulty") {
        None | Some(Value::Null) => Difficulty::Unknown,
        Some(Value::String(s)) => Difficulty::from_label(s),
        Some(other) => return Err(type_error("difficulty", "string", other)),
    };

    let bps = match map.get("bps") {
        None | Some(Value::Null) => Score::from_decimal_str(DEFAULT_BPS).expect("literal"),
        Some(Value::Number(n)) => Score::from_decimal_str(&n.to_string())
            .map_err(|e| format!("invalid field bps: {e}"))?,
        Some(Value::String(s)) => s
            .trim()
            .parse::<Score>()
            .map_err(|e| format!("invalid field bps: {e}"))?,
        Some(other) => return Err(type_error("bps", "number", other)),
    };
    if bps.is_negative() {
        return Err("invalid field bps: must be non-negative".into());
    }

    let cpu_limit_ms = positive_int(map, "cpu_limit_ms", DEFAULT_CPU_LIMIT_MS)?;
    let memory_limit_kib = positive_int(map, "memory_limit_kib", DEFAULT_MEMORY_LIMIT_KIB)?;

    let canonical_solutions = match map.get("canonical_solutions") {
        None | Some(Value::Null) => Vec::new(),
        Some(Value::Array(items)) => items
            .iter()
            .enumerate()
            .map(|(i, item)| {
                let obj = item
                    .as_object()
                    .ok_or_else(|| format!("invalid field canonical_solutions[{i}]: expected object"))?;
                let language = required_str(obj, "language")
                    .map_err(|e| format!("canonical_solutions[{i}]: {e}"))?;
                let source = required_str(obj, "source")
                    .map_err(|e| format!("canonical_solutions[{i}]: {e}"))?;
                Ok(CanonicalSolution { language, source })
            })
            .collect::<Result<_, String>>()?,
        Some(other) => return Err(type_error("canonical_solutions", "array", other)),
    };

    let cases = match map.get("test_cases") {
        None | Some(Value::Null) => Vec::new(),
        Some(Value::Array(items)) => items
            .iter()
            .enumerate()
            .map(|(i, item)| {
                let obj = item
                    .as_object()
                    .ok_or_else(|| format!("invalid field test_cases[{i}]: expected object"))?;
                let input = required_b64(obj, "input").map_err(|e| format!("test_cases[{i}]: {e}"))?;
                let output =
                    required_b64(obj, "output").map_err(|e| format!("test_cases[{i}]: {e}"))?;
                Ok((input, output))
            })
            .collect::<Result<_, String>>()?,
        Some(other) => return Err(type_error("test_cases", "array", other)),
    };

    Ok(ImportRecord {
        problem: Problem {
            pid,
            title,
            statement,
            bps,
            difficulty,
            cpu_limit_ms,
            memory_limit_kib,
            canonical_solutions,
            status: ProblemStatus::Draft,
        },
        cases,
    })
}

fn required_str(map: &Map<String, Value>, field: &str) -> Result<String, String> {
    match map.get(field) {
        None | Some(Value::Null) => Err(format!("missing field {field}")),
        Some(Value::String(s)) => Ok(s.clone()),
        Some(other) => Err(type_error(field, "string", other)),
    }
}

fn required_b64(map: &Map<String, Value>, field: &str) -> Result<Vec<u8>, String> {
    let text = required_str(map, field)?;
    bytes_b64::decode(&text).map_err(|e| format!("invalid field {field}: bad base64 ({e})"))
}

fn positive_int(map: &Map<String, Value>, field: &str, default: u64) -> Result<u64, String> {
    match map.get(field) {
        None | Some(Value::Null) => Ok(default),
        Some(Value::Number(n)) => match n.as_u64() {
            Some(v) if v > 0 => Ok(v),
            _ => Err(format!("invalid field {field}: must be a positive integer")),
        },
        Some(other) => Err(type_error(field, "integer", other)),
    }
}

fn type_error(field: &str, expected: &str, found: &Value) -> String {
    format!("invalid field {field}: expected {expected}, found {}", json_kind(found))
}

fn json_kind(v: &Value) -> &'static str {
    match v {
        Value::Null => "null",
        Value::Bool(_) => "boolean",
        Value::Number(_) => "number",
        Value::String(_) => "string",
        Value::Array(_) => "array",
        Value::Object(_) => "object",
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExportCase {
    pub input: String,
    pub output: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExportSubmission {
    pub sid: String,
    pub uid: String,
    pub language: String,
    pub mode: SubmissionMode,
    pub source: String,
    pub resolved_code: Option<String>,
    pub submitted_at: DateTime<Utc>,
    pub verdict: Verdict,
    pub total_cpu_ms: Option<u64>,
    pub peak_memory_kib: u64,
    pub case_results: Vec<CaseResult>,
}

/// One exported problem: the import fields plus status and submissions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExportRecord {
    pub pid: String,
    pub title: String,
    pub statement: String,
    pub difficulty: Difficulty,
    /// Decimal literal when the basic problem score is a terminating
    /// decimal; exact `n/d` string otherwise.
    pub bps: Value,
    pub cpu_limit_ms: u64,
    pub memory_limit_kib: u64,
    pub status: ProblemStatus,
    pub canonical_solutions: Vec<CanonicalSolution>,
    pub test_cases: Vec<ExportCase>,
    pub submissions: Vec<ExportSubmission>,
}

impl ExportRecord {
    pub fn build(problem: &Problem, cases: &[TestCase], submissions: &[Submission]) -> Self {
        let mut subs: Vec<&Submission> = submissions.iter().collect();
        subs.sort_by(|a, b| a.sid.cmp(&b.sid));
        ExportRecord {
            pid: problem.pid.clone(),
            title: problem.title.clone(),
            statement: problem.statement.clone(),
            difficulty: problem.difficulty,
            bps: bps_value(&problem.bps),
            cpu_limit_ms: problem.cpu_limit_ms,
            memory_limit_kib: problem.memory_limit_kib,
            status: problem.status,
            canonical_solutions: problem.canonical_solutions.clone(),
            test_cases: cases
                .iter()
                .map(|c| ExportCase {
                    input: bytes_b64::encode(&c.input),
                    output: bytes_b64::encode(&c.expected_output),
                    seed: match c.provenance {
                        crate::model::Provenance::Generated { seed } => Some(seed),
                        crate::model::Provenance::Imported => None,
                    },
                })
                .collect(),
            submissions: subs
                .into_iter()
                .map(|s| ExportSubmission {
                    sid: s.sid.clone(),
                    uid: s.uid.clone(),
                    language: s.language.clone(),
                    mode: s.mode,
                    source: s.source.clone(),
                    resolved_code: s.resolved_code.clone(),
                    submitted_at: s.submitted_at,
                    verdict: s.verdict,
                    total_cpu_ms: s.total_cpu_ms,
                    peak_memory_kib: s.peak_memory_kib,
                    case_results: s.case_results.clone(),
                })
                .collect(),
        }
    }

    /// Serialises as a single archive line, newline-terminated.
    pub fn to_line(&self) -> String {
        let mut line = serde_json::to_string(self).expect("export record serialises");
        line.push('\n');
        line
    }
}

/// Parses an export stream back into records.
pub fn parse_export(text: &str) -> Result<Vec<ExportRecord>, MalformedArchive> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| MalformedArchive {
                line: i + 1,
                message: e.to_string(),
            })
        })
        .collect()
}

fn bps_value(bps: &Score) -> Value {
    // Terminating decimals survive the f64 round trip through the shortest repr.
    let approx = bps.to_f64();
    if let Ok(back) = Score::from_f64_decimal(approx) {
        if &back == bps {
            if let Some(n) = serde_json::Number::from_f64(approx) {
                return Value::Number(n);
            }
        }
    }
    Value::String(bps.to_string())
}
