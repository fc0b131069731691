//! HTTP interface of the arena judge.

pub mod auth;
pub mod error;
pub mod schema;
pub mod wire;

use std::future::Future;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::rejection::QueryRejection;
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post, MethodRouter};
use axum::{Json, Router};
use serde::de::DeserializeOwned;

use arena_core::format;
use arena_core::model::{NewSubmission, Problem, ProblemStatus};
use arena_core::store::SubmissionFilter;
use arena_core::Arena;

use crate::auth::{Caller, Endpoint};
use crate::error::{ApiError, ApiResult};
use crate::wire::*;

pub use crate::error::ErrorDoc;

pub const DEFAULT_SAMPLE_SIZE: u64 = 20;

#[derive(Clone)]
pub struct AppState {
    pub arena: Arc<Arena>,
}

impl AppState {
    pub fn new(arena: Arc<Arena>) -> Self {
        AppState { arena }
    }
}

/// Runs store and sandbox work off the async executor.
async fn blocking<T, F>(f: F) -> ApiResult<T>
where
    F: FnOnce() -> ApiResult<T> + Send + 'static,
    T: Send + 'static,
{
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::internal(format!("worker task failed: {e}")))?
}

fn parse_json<T: DeserializeOwned>(body: &[u8]) -> ApiResult<T> {
    serde_json::from_slice(body).map_err(|e| ApiError::bad_request(format!("invalid document: {e}")))
}

fn query<T>(q: Result<Query<T>, QueryRejection>) -> ApiResult<T> {
    q.map(|Query(v)| v)
        .map_err(|e| ApiError::bad_request(format!("invalid query: {}", e.body_text())))
}

/// Drafts and ambiguous problems are only visible to curators.
fn visible(caller: &Caller, p: &Problem) -> bool {
    caller.is_curator() || matches!(p.status, ProblemStatus::Active | ProblemStatus::Retired)
}

fn visible_problem(state: &AppState, caller: &Caller, pid: &str) -> ApiResult<Problem> {
    let p = state.arena.store().problem(pid)?;
    if !visible(caller, &p) {
        return Err(ApiError::not_found(format!("problem {pid} not found")));
    }
    Ok(p)
}

fn user_name(state: &AppState, uid: &str) -> String {
    state.arena.store().user(uid).map(|u| u.name).unwrap_or_default()
}

// ---- handlers ----------------------------------------------------------------

async fn authenticate(State(state): State<AppState>, body: Bytes) -> ApiResult<Json<TokenDoc>> {
    let creds: Credentials = parse_json(&body)?;
    blocking(move || {
        let (user, token) = state.arena.store().issue_token(&creds.username, &creds.password)?;
        Ok(Json(TokenDoc {
            token,
            uid: user.uid,
            group: user.group,
        }))
    })
    .await
}

async fn list_problems(
    State(state): State<AppState>,
    caller: Caller,
    page: Result<Query<Page>, QueryRejection>,
) -> ApiResult<Json<Vec<ProblemSummaryDoc>>> {
    caller.require(Endpoint::ListProblems)?;
    let page = query(page)?;
    let list: Vec<ProblemSummaryDoc> = state
        .arena
        .store()
        .list_problems()
        .iter()
        .filter(|p| visible(&caller, p))
        .map(ProblemSummaryDoc::from)
        .collect();
    Ok(Json(page.apply(list)))
}

async fn create_problem(
    State(state): State<AppState>,
    caller: Caller,
    body: Bytes,
) -> ApiResult<(StatusCode, Json<CreatedProblem>)> {
    caller.require(Endpoint::CreateProblem)?;
    let value: serde_json::Value = parse_json(&body)?;
    let record = format::parse_record_value(&value).map_err(ApiError::bad_request)?;
    blocking(move || {
        let pid = state.arena.create_problem(record)?;
        Ok((StatusCode::CREATED, Json(CreatedProblem { pid })))
    })
    .await
}

async fn get_problem(
    State(state): State<AppState>,
    caller: Caller,
    Path(pid): Path<String>,
) -> ApiResult<Json<ProblemDoc>> {
    caller.require(Endpoint::GetProblem)?;
    let problem = visible_problem(&state, &caller, &pid)?;
    let (_, stats) = state.arena.store().get_problem(&pid)?;
    let cases = state.arena.store().cases(&pid)?.len();
    Ok(Json(ProblemDoc::new(&problem, &stats, cases, caller.is_curator())))
}

fn decode_case(c: CaseDoc) -> ApiResult<(Vec<u8>, Vec<u8>)> {
    match c.encoding.as_deref() {
        None | Some("text") => Ok((c.input.into_bytes(), c.output.into_bytes())),
        Some("base64") => {
            let input = arena_core::bytes_b64::decode(&c.input)
                .map_err(|e| ApiError::bad_request(format!("invalid field input: {e}")))?;
            let output = arena_core::bytes_b64::decode(&c.output)
                .map_err(|e| ApiError::bad_request(format!("invalid field output: {e}")))?;
            Ok((input, output))
        }
        Some(other) => Err(ApiError::bad_request(format!("unknown encoding {other:?}"))),
    }
}

async fn add_cases(
    State(state): State<AppState>,
    caller: Caller,
    Path(pid): Path<String>,
    body: Bytes,
) -> ApiResult<(StatusCode, Json<CaseIds>)> {
    caller.require(Endpoint::AddCases)?;
    state.arena.store().problem(&pid)?;
    let request: CaseRequest = parse_json(&body)?;
    blocking(move || {
        let case_ids = match request {
            CaseRequest::Generator { generator, n, seed0 } => {
                state.arena.generate_cases(&pid, &generator, n, seed0)?
            }
            CaseRequest::Many { cases } => {
                let cases = cases.into_iter().map(decode_case).collect::<ApiResult<Vec<_>>>()?;
                state.arena.add_explicit_cases(&pid, cases)?
            }
            CaseRequest::One(case) => state.arena.add_explicit_cases(&pid, vec![decode_case(case)?])?,
        };
        Ok((StatusCode::CREATED, Json(CaseIds { case_ids })))
    })
    .await
}

fn list_submissions_for(
    state: &AppState,
    q: SubmissionQuery,
    pid: Option<String>,
) -> ApiResult<Json<Vec<SubmissionSummaryDoc>>> {
    let uid = match (&q.uid, &q.user) {
        (Some(uid), _) => Some(uid.clone()),
        (None, Some(name)) => match state.arena.store().user_by_name(name) {
            Some(u) => Some(u.uid),
            None => return Ok(Json(Vec::new())),
        },
        (None, None) => None,
    };
    let filter = SubmissionFilter {
        pid: pid.or(q.pid),
        uid,
        verdict: q.verdict,
    };
    let page = Page {
        offset: q.offset,
        limit: q.limit,
    };
    let list: Vec<SubmissionSummaryDoc> = state
        .arena
        .store()
        .list_submissions(&filter)
        .into_iter()
        .map(SubmissionSummaryDoc::from)
        .collect();
    Ok(Json(page.apply(list)))
}

async fn problem_submissions(
    State(state): State<AppState>,
    caller: Caller,
    Path(pid): Path<String>,
    q: Result<Query<SubmissionQuery>, QueryRejection>,
) -> ApiResult<Json<Vec<SubmissionSummaryDoc>>> {
    caller.require(Endpoint::ProblemSubmissions)?;
    visible_problem(&state, &caller, &pid)?;
    list_submissions_for(&state, query(q)?, Some(pid))
}

async fn list_submissions(
    State(state): State<AppState>,
    caller: Caller,
    q: Result<Query<SubmissionQuery>, QueryRejection>,
) -> ApiResult<Json<Vec<SubmissionSummaryDoc>>> {
    caller.require(Endpoint::ListSubmissions)?;
    list_submissions_for(&state, query(q)?, None)
}

async fn filter_problem(
    State(state): State<AppState>,
    caller: Caller,
    Path(pid): Path<String>,
    body: Bytes,
) -> ApiResult<Json<FilterResponse>> {
    caller.require(Endpoint::FilterProblem)?;
    let request: FilterRequest = if body.iter().all(u8::is_ascii_whitespace) {
        FilterRequest::default()
    } else {
        parse_json(&body)?
    };
    blocking(move || {
        let sample = request.sample_size.unwrap_or(DEFAULT_SAMPLE_SIZE);
        let decision = state.arena.consistency_filter(&pid, sample, request.generator.as_ref())?;
        let status = state.arena.store().problem(&pid)?.status;
        Ok(Json(FilterResponse { pid, decision, status }))
    })
    .await
}

async fn set_problem_status(
    State(state): State<AppState>,
    caller: Caller,
    Path(pid): Path<String>,
    body: Bytes,
) -> ApiResult<Json<ProblemSummaryDoc>> {
    caller.require(Endpoint::SetProblemStatus)?;
    let request: StatusRequest = parse_json(&body)?;
    blocking(move || {
        state.arena.set_status(&pid, request.status)?;
        Ok(Json(ProblemSummaryDoc::from(&state.arena.store().problem(&pid)?)))
    })
    .await
}

async fn export_problem(
    State(state): State<AppState>,
    caller: Caller,
    Path(pid): Path<String>,
) -> ApiResult<Response> {
    caller.require(Endpoint::ExportProblem)?;
    visible_problem(&state, &caller, &pid)?;
    let mut line = state.arena.store().export_solutions(&pid)?;
    line.push('\n');
    Ok(([(header::CONTENT_TYPE, "application/x-ndjson")], line).into_response())
}

async fn import(State(state): State<AppState>, caller: Caller, body: Bytes) -> ApiResult<Response> {
    caller.require(Endpoint::Import)?;
    let text = String::from_utf8(body.to_vec()).map_err(|_| ApiError::bad_request("archive is not UTF-8"))?;
    blocking(move || {
        let report = state.arena.import(&text)?;
        Ok(Json(report).into_response())
    })
    .await
}

async fn submit(
    State(state): State<AppState>,
    caller: Caller,
    body: Bytes,
) -> ApiResult<(StatusCode, Json<SubmitResponse>)> {
    caller.require(Endpoint::Submit)?;
    let request: SubmitRequest = parse_json(&body)?;
    blocking(move || {
        let sub = state.arena.submit(NewSubmission {
            pid: request.pid,
            uid: caller.0.uid,
            language: request.language,
            mode: request.mode,
            source: request.source,
        })?;
        Ok((StatusCode::ACCEPTED, Json(SubmitResponse { submission_id: sub.sid })))
    })
    .await
}

async fn get_submission(
    State(state): State<AppState>,
    caller: Caller,
    Path(sid): Path<String>,
) -> ApiResult<Json<SubmissionDoc>> {
    caller.require(Endpoint::GetSubmission)?;
    let sub = state.arena.store().submission(&sid)?;
    let user = user_name(&state, &sub.uid);
    Ok(Json(SubmissionDoc::new(&sub, &user)))
}

fn ranking_rows(state: &AppState, entries: &[arena_core::eval::RankingEntry]) -> Vec<RankingRow> {
    entries
        .iter()
        .enumerate()
        .map(|(i, e)| RankingRow::new(i + 1, e, &user_name(state, &e.uid)))
        .collect()
}

async fn ranking(
    State(state): State<AppState>,
    caller: Caller,
    page: Result<Query<Page>, QueryRejection>,
) -> ApiResult<Json<Vec<RankingRow>>> {
    caller.require(Endpoint::Ranking)?;
    let page = query(page)?;
    let entries = state.arena.ranking();
    Ok(Json(page.apply(ranking_rows(&state, &entries))))
}

fn checkpoint_doc(state: &AppState, cp: &arena_core::eval::CheckpointSnapshot) -> CheckpointDoc {
    CheckpointDoc {
        checkpoint_id: cp.checkpoint_id.clone(),
        taken_at: cp.taken_at,
        audit_matched: cp.audit_matched,
        entries: ranking_rows(state, &cp.entries),
    }
}

async fn create_checkpoint(
    State(state): State<AppState>,
    caller: Caller,
) -> ApiResult<(StatusCode, Json<CheckpointDoc>)> {
    caller.require(Endpoint::CreateCheckpoint)?;
    blocking(move || {
        let cp = state.arena.checkpoint()?;
        Ok((StatusCode::CREATED, Json(checkpoint_doc(&state, &cp))))
    })
    .await
}

async fn list_checkpoints(
    State(state): State<AppState>,
    caller: Caller,
    q: Result<Query<CheckpointQuery>, QueryRejection>,
) -> ApiResult<Json<Vec<CheckpointSummaryDoc>>> {
    caller.require(Endpoint::ListCheckpoints)?;
    let q = query(q)?;
    Ok(Json(
        state
            .arena
            .store()
            .checkpoints(q.from, q.to)
            .iter()
            .map(CheckpointSummaryDoc::from)
            .collect(),
    ))
}

async fn get_checkpoint(
    State(state): State<AppState>,
    caller: Caller,
    Path(id): Path<String>,
) -> ApiResult<Json<CheckpointDoc>> {
    caller.require(Endpoint::GetCheckpoint)?;
    let cp = state.arena.store().checkpoint(&id)?;
    Ok(Json(checkpoint_doc(&state, &cp)))
}

async fn create_user(
    State(state): State<AppState>,
    caller: Caller,
    body: Bytes,
) -> ApiResult<(StatusCode, Json<UserDoc>)> {
    caller.require(Endpoint::CreateUser)?;
    let doc: NewUserDoc = parse_json(&body)?;
    blocking(move || {
        let kind = doc.kind.unwrap_or(arena_core::model::GeneratorKind::None);
        let user = state
            .arena
            .store()
            .create_user(&doc.name, &doc.password, doc.group, kind, doc.backend)?;
        Ok((StatusCode::CREATED, Json(UserDoc::from(&user))))
    })
    .await
}

async fn list_users(
    State(state): State<AppState>,
    caller: Caller,
    page: Result<Query<Page>, QueryRejection>,
) -> ApiResult<Json<Vec<UserDoc>>> {
    caller.require(Endpoint::ListUsers)?;
    let page = query(page)?;
    let users: Vec<UserDoc> = state.arena.store().list_users().iter().map(UserDoc::from).collect();
    Ok(Json(page.apply(users)))
}

async fn api_schema(caller: Caller) -> ApiResult<Json<serde_json::Value>> {
    caller.require(Endpoint::Schema)?;
    Ok(Json(schema::schema()))
}

async fn fallback() -> ApiError {
    ApiError::not_found("no such endpoint")
}

/// Registers `route` under `path` both with and without a trailing slash.
fn both(router: Router<AppState>, path: &str, route: MethodRouter<AppState>) -> Router<AppState> {
    let trimmed = path.trim_end_matches('/');
    router.route(&format!("{trimmed}/"), route.clone()).route(trimmed, route)
}

pub fn router(state: AppState) -> Router {
    let mut r = Router::new();
    r = both(r, "/api/authentication/", post(authenticate));
    r = both(r, "/api/problem/", get(list_problems).post(create_problem));
    r = both(r, "/api/problem/:pid/", get(get_problem));
    r = both(r, "/api/problem/:pid/case", post(add_cases));
    r = both(r, "/api/problem/:pid/submission/", get(problem_submissions));
    r = both(r, "/api/problem/:pid/filter", post(filter_problem));
    r = both(r, "/api/problem/:pid/status", post(set_problem_status));
    r = both(r, "/api/problem/:pid/export", get(export_problem));
    r = both(r, "/api/import", post(import));
    r = both(r, "/api/submission/", get(list_submissions).post(submit));
    r = both(r, "/api/submission/:sid", get(get_submission));
    r = both(r, "/api/ranking", get(ranking));
    r = both(r, "/api/checkpoint/", get(list_checkpoints).post(create_checkpoint));
    r = both(r, "/api/checkpoint/:id", get(get_checkpoint));
    r = both(r, "/api/user/", get(list_users).post(create_user));
    r = both(r, "/api/schema", get(api_schema));
    r.fallback(fallback).with_state(state)
}

/// Serves until `shutdown` resolves.
pub async fn serve(
    listener: tokio::net::TcpListener,
    state: AppState,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    axum::serve(listener, router(state)).with_graceful_shutdown(shutdown).await
}
