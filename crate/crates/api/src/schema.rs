//! Machine-readable description of the API, served at `/api/schema`.

use serde_json::{json, Map, Value};

use arena_core::model::UserGroup;

use crate::auth::{allowed, Endpoint};

pub const SCHEMA_VERSION: u32 = 1;

struct Shape {
    request: Option<&'static str>,
    query: Option<&'static str>,
    status: u16,
    response: &'static str,
    list: bool,
}

fn shape(e: Endpoint) -> Shape {
    use Endpoint::*;
    let s = |request, query, status, response, list| Shape {
        request,
        query,
        status,
        response,
        list,
    };
    match e {
        Authenticate => s(Some("Credentials"), None, 200, "Token", false),
        ListProblems => s(None, Some("Page"), 200, "ProblemSummary", true),
        CreateProblem => s(Some("ProblemRecord"), None, 201, "CreatedProblem", false),
        GetProblem => s(None, None, 200, "Problem", false),
        AddCases => s(Some("CaseRequest"), None, 201, "CaseIds", false),
        ProblemSubmissions | ListSubmissions => s(None, Some("SubmissionQuery"), 200, "SubmissionSummary", true),
        FilterProblem => s(Some("FilterRequest"), None, 200, "FilterResponse", false),
        SetProblemStatus => s(Some("StatusRequest"), None, 200, "ProblemSummary", false),
        ExportProblem => s(None, None, 200, "ExportLine", false),
        Import => s(Some("Archive"), None, 200, "ImportReport", false),
        Submit => s(Some("SubmitRequest"), None, 202, "SubmitResponse", false),
        GetSubmission => s(None, None, 200, "Submission", false),
        Ranking => s(None, Some("Page"), 200, "RankingRow", true),
        CreateCheckpoint => s(None, None, 201, "Checkpoint", false),
        ListCheckpoints => s(None, Some("CheckpointQuery"), 200, "CheckpointSummary", true),
        GetCheckpoint => s(None, None, 200, "Checkpoint", false),
        CreateUser => s(Some("NewUser"), None, 201, "User", false),
        ListUsers => s(None, Some("Page"), 200, "User", true),
        Schema => s(None, None, 200, "Schema", false),
    }
}

fn fields(pairs: &[(&str, &str)]) -> Value {
    let mut m = Map::new();
    for (k, v) in pairs {
        m.insert((*k).to_owned(), Value::String((*v).to_owned()));
    }
    Value::Object(m)
}

/// Field name to type for every JSON document. `?` marks optional fields.
pub fn documents() -> Value {
    let verdicts = "enum(Queued,Judging,Accepted,WrongAnswer,TimeLimitExceeded,MemoryLimitExceeded,RuntimeError,CompileError,InternalError)";
    let contribution = "map(pid -> {cs: rational, es: rational})";
    json!({
        "Credentials": fields(&[("username", "string"), ("password", "string")]),
        "Token": fields(&[("token", "string"), ("uid", "string"), ("group", "enum(curator,generator,reader)")]),
        "Page": fields(&[("offset", "integer?"), ("limit", "integer? (default 100, max 1000)")]),
        "ProblemSummary": fields(&[
            ("pid", "string"),
            ("title", "string"),
            ("difficulty", "enum(easy,medium,hard,unknown)"),
            ("status", "enum(draft,active,ambiguous,retired)"),
        ]),
        "Stats": fields(&[
            ("solved", "integer"),
            ("total", "integer"),
            ("ac", "decimal-string? (percent, 2 places)"),
            ("ac_exact", "rational?"),
        ]),
        "Problem": fields(&[
            ("pid", "string"),
            ("title", "string"),
            ("statement", "string"),
            ("difficulty", "enum(easy,medium,hard,unknown)"),
            ("status", "enum(draft,active,ambiguous,retired)"),
            ("bps", "rational"),
            ("cpu_limit_ms", "integer"),
            ("memory_limit_kib", "integer"),
            ("case_count", "integer"),
            ("stats", "Stats"),
            ("canonical_solutions", "list({language, source})? (curators only)"),
        ]),
        "ProblemRecord": fields(&[
            ("pid", "string"),
            ("title", "string"),
            ("statement", "string"),
            ("bps", "number|rational-string? (default 5)"),
            ("difficulty", "string?"),
            ("cpu_limit_ms", "integer? (default 2000)"),
            ("memory_limit_kib", "integer? (default 262144)"),
            ("canonical_solutions", "list({language, source})?"),
            ("test_cases", "list({input: base64, output: base64})?"),
        ]),
        "CreatedProblem": fields(&[("pid", "string")]),
        "Case": fields(&[("input", "string"), ("output", "string"), ("encoding", "enum(text,base64)?")]),
        "CaseRequest": fields(&[
            ("input", "string (single explicit case)"),
            ("output", "string (single explicit case)"),
            ("cases", "list(Case) (several explicit cases)"),
            ("generator", "{language, source} (generated cases)"),
            ("n", "integer (generated cases)"),
            ("seed0", "integer? (generated cases)"),
        ]),
        "CaseIds": fields(&[("case_ids", "list(string)")]),
        "FilterRequest": fields(&[("sample_size", "integer? (default 20)"), ("generator", "{language, source}?")]),
        "FilterResponse": fields(&[
            ("pid", "string"),
            ("decision", "enum(keep,mark_ambiguous)"),
            ("status", "enum(draft,active,ambiguous,retired)"),
        ]),
        "StatusRequest": fields(&[("status", "enum(draft,active,ambiguous,retired)")]),
        "ExportLine": fields(&[("body", "one JSON line: problem, cases and all submissions")]),
        "Archive": fields(&[("body", "line-delimited ProblemRecord documents")]),
        "ImportReport": fields(&[("accepted", "integer"), ("rejected", "list({pid, line, reason})")]),
        "SubmitRequest": fields(&[
            ("pid", "string"),
            ("language", "string"),
            ("mode", "enum(code,prompt)? (default code)"),
            ("source", "string"),
        ]),
        "SubmitResponse": fields(&[("submission_id", "string")]),
        "SubmissionQuery": fields(&[
            ("pid", "string?"),
            ("uid", "string?"),
            ("user", "string?"),
            ("verdict", "string?"),
            ("offset", "integer?"),
            ("limit", "integer?"),
        ]),
        "SubmissionSummary": fields(&[
            ("submission_id", "string"),
            ("pid", "string"),
            ("uid", "string"),
            ("language", "string"),
            ("mode", "enum(code,prompt)"),
            ("verdict", verdicts),
            ("submitted_at", "timestamp"),
            ("total_cpu_ms", "integer?"),
        ]),
        "CaseResult": fields(&[
            ("case_id", "string"),
            ("outcome", "enum(Pass,Fail,Timeout,MemoryExceeded,Crash)"),
            ("cpu_ms", "integer"),
            ("memory_kib", "integer"),
            ("stderr_excerpt", "string"),
        ]),
        "Submission": fields(&[
            ("submission_id", "string"),
            ("pid", "string"),
            ("uid", "string"),
            ("user", "string"),
            ("language", "string"),
            ("mode", "enum(code,prompt)"),
            ("source", "string"),
            ("resolved_code", "string?"),
            ("submitted_at", "timestamp"),
            ("verdict", verdicts),
            ("case_results", "list(CaseResult)"),
            ("total_cpu_ms", "integer?"),
            ("peak_memory_kib", "integer"),
            ("detail", "string?"),
        ]),
        "RankingRow": fields(&[
            ("rank", "integer"),
            ("uid", "string"),
            ("user", "string"),
            ("dp", "decimal-string (2 places)"),
            ("pass", "decimal-string (percent, 2 places)"),
            ("solved", "integer"),
            ("dp_exact", "rational"),
            ("per_problem", contribution),
        ]),
        "CheckpointQuery": fields(&[("from", "timestamp?"), ("to", "timestamp?")]),
        "CheckpointSummary": fields(&[
            ("checkpoint_id", "string"),
            ("taken_at", "timestamp"),
            ("audit_matched", "boolean"),
            ("users", "integer"),
        ]),
        "Checkpoint": fields(&[
            ("checkpoint_id", "string"),
            ("taken_at", "timestamp"),
            ("audit_matched", "boolean"),
            ("entries", "list(RankingRow)"),
        ]),
        "NewUser": fields(&[
            ("name", "string"),
            ("password", "string"),
            ("group", "enum(curator,generator,reader)"),
            ("kind", "enum(machine,human,none)? (required for generators)"),
            ("backend", "string?"),
        ]),
        "User": fields(&[
            ("uid", "string"),
            ("name", "string"),
            ("group", "enum(curator,generator,reader)"),
            ("kind", "enum(machine,human,none)"),
            ("attempt_policy", "enum(single,unlimited)"),
            ("backend", "string?"),
        ]),
        "Error": fields(&[("error", "string"), ("message", "string")]),
        "Schema": fields(&[("version", "integer"), ("endpoints", "list"), ("documents", "map")]),
    })
}

pub fn schema() -> Value {
    let groups = [UserGroup::Curator, UserGroup::Generator, UserGroup::Reader];
    let endpoints: Vec<Value> = Endpoint::ALL
        .iter()
        .map(|&e| {
            let s = shape(e);
            let allowed_groups: Vec<&str> = groups
                .iter()
                .filter(|&&g| allowed(g, e))
                .map(|g| match g {
                    UserGroup::Curator => "curator",
                    UserGroup::Generator => "generator",
                    UserGroup::Reader => "reader",
                })
                .collect();
            json!({
                "name": format!("{e:?}"),
                "method": e.method(),
                "path": e.path(),
                "auth": if e.is_public() { "none" } else { "Authorization: Token <token>" },
                "groups": allowed_groups,
                "request": s.request,
                "query": s.query,
                "status": s.status,
                "response": s.response,
                "list": s.list,
            })
        })
        .collect();
    json!({
        "version": SCHEMA_VERSION,
        "errors": {
            "400": "malformed document or unknown language",
            "401": "missing, invalid or revoked token; bad credentials",
            "403": "group not permitted",
            "404": "unknown or hidden resource; problem not judgeable",
            "409": "duplicate, single attempt exhausted, or ambiguous problem",
            "422": "inconclusive case generation",
        },
        "endpoints": endpoints,
        "documents": documents(),
    })
}
