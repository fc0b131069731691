//! Token authentication and the group permission matrix.

use axum::async_trait;
use axum::extract::FromRequestParts;
use axum::http::header::AUTHORIZATION;
use axum::http::request::Parts;

use arena_core::model::{UserAccount, UserGroup};

use crate::error::ApiError;
use crate::AppState;

/// Every route the service exposes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Endpoint {
    Authenticate,
    ListProblems,
    CreateProblem,
    GetProblem,
    AddCases,
    ProblemSubmissions,
    FilterProblem,
    SetProblemStatus,
    ExportProblem,
    Import,
    Submit,
    ListSubmissions,
    GetSubmission,
    Ranking,
    CreateCheckpoint,
    ListCheckpoints,
    GetCheckpoint,
    CreateUser,
    ListUsers,
    Schema,
}

impl Endpoint {
    pub const ALL: [Endpoint; 20] = [
        Endpoint::Authenticate,
        Endpoint::ListProblems,
        Endpoint::CreateProblem,
        Endpoint::GetProblem,
        Endpoint::AddCases,
        Endpoint::ProblemSubmissions,
        Endpoint::FilterProblem,
        Endpoint::SetProblemStatus,
        Endpoint::ExportProblem,
        Endpoint::Import,
        Endpoint::Submit,
        Endpoint::ListSubmissions,
        Endpoint::GetSubmission,
        Endpoint::Ranking,
        Endpoint::CreateCheckpoint,
        Endpoint::ListCheckpoints,
        Endpoint::GetCheckpoint,
        Endpoint::CreateUser,
        Endpoint::ListUsers,
        Endpoint::Schema,
    ];

    pub fn method(self) -> &'static str {
        use Endpoint::*;
        match self {
            Authenticate | CreateProblem | AddCases | FilterProblem | SetProblemStatus | Import | Submit
            | CreateCheckpoint | CreateUser => "POST",
            _ => "GET",
        }
    }

    /// Path template; `{pid}`, `{sid}` and `{id}` are path parameters.
    pub fn path(self) -> &'static str {
        use Endpoint::*;
        match self {
            Authenticate => "/api/authentication/",
            ListProblems | CreateProblem => "/api/problem/",
            GetProblem => "/api/problem/{pid}/",
            AddCases => "/api/problem/{pid}/case",
            ProblemSubmissions => "/api/problem/{pid}/submission/",
            FilterProblem => "/api/problem/{pid}/filter",
            SetProblemStatus => "/api/problem/{pid}/status",
            ExportProblem => "/api/problem/{pid}/export",
            Import => "/api/import",
            Submit => "/api/submission",
            ListSubmissions => "/api/submission/",
            GetSubmission => "/api/submission/{sid}",
            Ranking => "/api/ranking",
            CreateCheckpoint => "/api/checkpoint",
            ListCheckpoints => "/api/checkpoint/",
            GetCheckpoint => "/api/checkpoint/{id}",
            CreateUser | ListUsers => "/api/user/",
            Schema => "/api/schema",
        }
    }

    /// Whether the endpoint can be called without a token.
    pub fn is_public(self) -> bool {
        self == Endpoint::Authenticate
    }
}

/// The permission matrix. Everyone may read; only generators submit
/// solutions; curators manage problems, users and checkpoints.
pub fn allowed(group: UserGroup, endpoint: Endpoint) -> bool {
    use Endpoint::*;
    match endpoint {
        Authenticate | ListProblems | GetProblem | ProblemSubmissions | ExportProblem | ListSubmissions
        | GetSubmission | Ranking | ListCheckpoints | GetCheckpoint | Schema => true,
        Submit => group == UserGroup::Generator,
        CreateProblem | AddCases | FilterProblem | SetProblemStatus | Import | CreateCheckpoint | CreateUser
        | ListUsers => group == UserGroup::Curator,
    }
}

/// The authenticated user behind a request.
#[derive(Debug, Clone)]
pub struct Caller(pub UserAccount);

impl Caller {
    pub fn require(&self, endpoint: Endpoint) -> Result<(), ApiError> {
        if allowed(self.0.group, endpoint) {
            Ok(())
        } else {
            Err(ApiError::forbidden(format!(
                "{} {} is not permitted for group {:?}",
                endpoint.method(),
                endpoint.path(),
                self.0.group
            )))
        }
    }

    pub fn is_curator(&self) -> bool {
        self.0.group == UserGroup::Curator
    }
}

fn bearer(parts: &Parts) -> Option<&str> {
    let value = parts.headers.get(AUTHORIZATION)?.to_str().ok()?;
    let (scheme, token) = value.trim().split_once(' ')?;
    scheme.eq_ignore_ascii_case("token").then(|| token.trim())
}

#[async_trait]
impl FromRequestParts<AppState> for Caller {
    type Rejection = ApiError;

    async fn from_request_parts(parts: &mut Parts, state: &AppState) -> Result<Self, Self::Rejection> {
        let token = bearer(parts).ok_or_else(|| ApiError::unauthorized("missing Authorization: Token header"))?;
        state
            .arena
            .store()
            .authenticate(token)
            .map(Caller)
            .ok_or_else(|| ApiError::unauthorized("invalid or revoked token"))
    }
}
