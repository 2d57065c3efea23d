use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::{Arc, Mutex};

use agentbank::agent::{AgentEngine, AgentMemory, EngineConfig, Variant};
use agentbank::battery::Battery;
use agentbank::corpus::AnswerValue;
use agentbank::runner::{build_agent, Backends, Population};
use axum::body::{to_bytes, Body};
use axum::extract::{Request, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::middleware::{self, Next};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use chrono::{SecondsFormat, Utc};
use serde::{Deserialize, Serialize};
use serde_json::json;
use sha2::{Digest, Sha256};

use crate::audit::{AuditLog, AuditRecord, Decision};
use crate::bank::{AgentBank, Filter, QueryError};
use crate::session::{self, Interviews};
use crate::tokens::{claimed_id, AuthFailure, Tier, TokenStore};

const MAX_BODY: usize = 1 << 20;

/// What a handler tells the audit layer about its response.
#[derive(Debug, Clone)]
pub(crate) struct Outcome {
    pub rows: usize,
    pub decision: Decision,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ApiError {
    NotFound(String),
    Unauthorized(String),
    /// Refused by policy; the first field is the audit reason.
    Refused(&'static str, String),
    InvalidArgument(String),
    Conflict(String),
    Backend(String),
    Internal(String),
}

impl ApiError {
    fn parts(&self) -> (StatusCode, &'static str, &str) {
        match self {
            ApiError::NotFound(m) => (StatusCode::NOT_FOUND, "not_found", m),
            ApiError::Unauthorized(m) => (StatusCode::UNAUTHORIZED, "unauthorized", m),
            ApiError::Refused(reason, m) => (StatusCode::FORBIDDEN, reason, m),
            ApiError::InvalidArgument(m) => (StatusCode::BAD_REQUEST, "invalid_argument", m),
            ApiError::Conflict(m) => (StatusCode::CONFLICT, "conflict", m),
            ApiError::Backend(m) => (StatusCode::BAD_GATEWAY, "backend", m),
            ApiError::Internal(m) => (StatusCode::INTERNAL_SERVER_ERROR, "internal", m),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let (status, reason, message) = self.parts();
        let mut r = (status, Json(json!({ "error": reason, "message": message }))).into_response();
        r.extensions_mut().insert(Outcome { rows: 0, decision: Decision::Refused(reason.into()) });
        r
    }
}

impl From<QueryError> for ApiError {
    fn from(e: QueryError) -> Self {
        match e {
            QueryError::UnknownTask(_) | QueryError::UnknownAgent(_) => ApiError::NotFound(e.to_string()),
            QueryError::UnknownAttribute(_) => ApiError::InvalidArgument(e.to_string()),
            QueryError::BelowKMin { .. } => ApiError::Refused("k_min", e.to_string()),
        }
    }
}

pub(crate) fn served(status: StatusCode, rows: usize, body: impl Serialize) -> Response {
    let mut r = (status, Json(body)).into_response();
    r.extensions_mut().insert(Outcome { rows, decision: Decision::Served });
    r
}

/// Free-prompt support: agents are built from the corpus on first use.
pub struct AgentRuntime {
    pub population: Population,
    pub batteries: Vec<Battery>,
    pub backends: Backends,
    pub variant: Variant,
    pub seed: u64,
    pub engine: EngineConfig,
    cache: Mutex<HashMap<String, Arc<AgentMemory>>>,
}

impl AgentRuntime {
    pub fn new(
        population: Population,
        batteries: Vec<Battery>,
        backends: Backends,
        variant: Variant,
        seed: u64,
    ) -> Self {
        Self {
            population,
            batteries,
            backends,
            variant,
            seed,
            engine: EngineConfig::default(),
            cache: Mutex::new(HashMap::new()),
        }
    }

    fn respond(&self, agent_id: &str, prompt: &str) -> Result<String, ApiError> {
        let subject = self
            .population
            .subjects
            .iter()
            .find(|s| s.id() == agent_id)
            .ok_or_else(|| ApiError::NotFound(format!("no conditioning material for `{agent_id}`")))?;
        let backend = self.backends.for_subject(subject);
        let cached = self.cache.lock().expect("agent cache poisoned").get(agent_id).cloned();
        let memory = match cached {
            Some(m) => m,
            None => {
                let m = build_agent(subject, self.variant, &self.batteries, &*backend, self.seed)
                    .map_err(|e| backend_failure(agent_id, e))?;
                let m = Arc::new(m);
                self.cache.lock().expect("agent cache poisoned").insert(agent_id.into(), Arc::clone(&m));
                m
            }
        };
        let engine = AgentEngine::new(&*backend, self.engine.clone());
        engine.respond(&memory, prompt).map(|(r, _)| r).map_err(|e| backend_failure(agent_id, e))
    }
}

/// Backend errors can quote the prompt, which holds transcript text; only the
/// log gets the detail.
pub(crate) fn backend_failure(subject: &str, e: impl std::fmt::Display) -> ApiError {
    tracing::warn!(subject, error = %e, "backend call failed");
    ApiError::Backend(format!("the model backend failed for `{subject}`"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Proposal {
    pub proposal_id: String,
    pub text: String,
    pub submitted_at: String,
    pub status: String,
}

pub struct AppState {
    pub bank: AgentBank,
    pub tokens: TokenStore,
    pub audit: AuditLog,
    pub k_min: usize,
    pub agents: Option<AgentRuntime>,
    pub interviews: Option<Interviews>,
    proposals: Mutex<Vec<Proposal>>,
    proposals_path: Option<PathBuf>,
}

impl AppState {
    pub fn new(bank: AgentBank, tokens: TokenStore, audit: AuditLog, k_min: usize) -> Self {
        Self {
            bank,
            tokens,
            audit,
            k_min,
            agents: None,
            interviews: None,
            proposals: Mutex::new(Vec::new()),
            proposals_path: None,
        }
    }

    /// Persists proposals as JSONL at `path`, continuing any existing file.
    pub fn with_proposal_file(mut self, path: PathBuf) -> Result<Self, crate::ServerError> {
        if path.exists() {
            let text = std::fs::read_to_string(&path)
                .map_err(|source| crate::ServerError::Io { path: path.clone(), source })?;
            let existing = text
                .lines()
                .filter(|l| !l.trim().is_empty())
                .map(serde_json::from_str)
                .collect::<Result<Vec<Proposal>, _>>()
                .map_err(|e| crate::ServerError::Config(format!("proposals: {e}")))?;
            *self.proposals.get_mut().expect("fresh mutex") = existing;
        }
        self.proposals_path = Some(path);
        Ok(self)
    }

    pub fn proposals(&self) -> Vec<Proposal> {
        self.proposals.lock().expect("proposals poisoned").clone()
    }
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/v1/health", get(health))
        .route("/v1/tasks", get(tasks))
        .route("/v1/query/aggregate", post(aggregate))
        .route("/v1/query/individual", post(individual))
        .route("/v1/proposals", post(submit_proposal).get(list_proposals))
        .merge(session::routes())
        .layer(middleware::from_fn_with_state(Arc::clone(&state), audit_layer))
        .with_state(state)
}

fn bearer(headers: &HeaderMap) -> Option<&str> {
    headers.get(header::AUTHORIZATION)?.to_str().ok()?.strip_prefix("Bearer ").map(str::trim)
}

fn status_reason(status: StatusCode) -> String {
    match status.as_u16() {
        400 | 413 | 415 | 422 => "invalid_argument".into(),
        401 => "unauthorized".into(),
        404 => "not_found".into(),
        405 => "method_not_allowed".into(),
        n => format!("http_{n}"),
    }
}

/// Writes exactly one audit record per request, whatever the outcome.
async fn audit_layer(State(state): State<Arc<AppState>>, req: Request, next: Next) -> Response {
    let timestamp = Utc::now().to_rfc3339_opts(SecondsFormat::Millis, true);
    let endpoint = format!("{} {}", req.method(), req.uri().path());
    let token_id = bearer(req.headers()).and_then(claimed_id).unwrap_or("anonymous").to_string();
    let (parts, body) = req.into_parts();
    let mut hasher = Sha256::new();
    hasher.update(format!("{} {}\n", parts.method, parts.uri).as_bytes());
    let response = match to_bytes(body, MAX_BODY).await {
        Ok(bytes) => {
            hasher.update(&bytes);
            next.run(Request::from_parts(parts, Body::from(bytes))).await
        }
        Err(_) => ApiError::InvalidArgument("request body too large".into()).into_response(),
    };
    let query_digest = hasher.finalize().iter().map(|b| format!("{b:02x}")).collect();
    let outcome = response.extensions().get::<Outcome>().cloned().unwrap_or_else(|| {
        let status = response.status();
        let decision = if status.is_success() { Decision::Served } else { Decision::Refused(status_reason(status)) };
        Outcome { rows: 0, decision }
    });
    let record = AuditRecord {
        timestamp,
        token_id,
        endpoint,
        query_digest,
        row_count: outcome.rows,
        decision: outcome.decision,
    };
    if let Err(e) = state.audit.append(&record) {
        tracing::error!(error = %e, "audit append failed");
        return ApiError::Internal("audit log unavailable".into()).into_response();
    }
    response
}

async fn health(State(state): State<Arc<AppState>>) -> Response {
    served(
        StatusCode::OK,
        0,
        json!({ "status": "ok", "agents": state.bank.agents.len(), "tasks": state.bank.tasks.len(), "k_min": state.k_min }),
    )
}

async fn tasks(State(state): State<Arc<AppState>>) -> Response {
    served(StatusCode::OK, state.bank.tasks.len(), json!({ "tasks": state.bank.tasks }))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct AggregateRequest {
    task_id: String,
    #[serde(default)]
    filter: Filter,
}

async fn aggregate(
    State(state): State<Arc<AppState>>,
    Json(req): Json<AggregateRequest>,
) -> Result<Response, ApiError> {
    let r = state.bank.aggregate(&req.task_id, &req.filter, state.k_min)?;
    Ok(served(StatusCode::OK, r.rows(), r))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct IndividualRequest {
    /// `None` selects every agent.
    #[serde(default)]
    agents: Option<Vec<String>>,
    #[serde(default)]
    task_id: Option<String>,
    #[serde(default)]
    prompt: Option<String>,
}

#[derive(Debug, Serialize)]
struct IndividualResult {
    agent_id: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    answer: Option<AnswerValue>,
    #[serde(skip_serializing_if = "Option::is_none")]
    response: Option<String>,
}

async fn individual(
    State(state): State<Arc<AppState>>,
    headers: HeaderMap,
    Json(req): Json<IndividualRequest>,
) -> Result<Response, ApiError> {
    let token = state.tokens.verify(bearer(&headers), Utc::now()).map_err(|f| {
        ApiError::Unauthorized(
            match f {
                AuthFailure::Missing => "a bearer token is required",
                AuthFailure::Unknown => "token not recognized",
                AuthFailure::Expired => "token expired",
            }
            .into(),
        )
    })?;
    if token.tier != Tier::Individual {
        return Err(ApiError::Unauthorized("token tier does not permit individual queries".into()));
    }
    match (req.task_id, req.prompt) {
        (Some(task_id), None) => {
            if !token.allows_task(&task_id) {
                return Err(ApiError::Refused("scope", format!("task `{task_id}` is outside the token scope")));
            }
            let (answers, excluded) = state.bank.individual(&task_id, req.agents.as_deref())?;
            let results: Vec<IndividualResult> = answers
                .into_iter()
                .map(|a| IndividualResult { agent_id: a.agent_id, answer: a.answer, response: None })
                .collect();
            Ok(served(
                StatusCode::OK,
                results.len(),
                json!({ "task_id": task_id, "excluded_count": excluded, "results": results }),
            ))
        }
        (None, Some(prompt)) => {
            if !token.allows_prompt() {
                return Err(ApiError::Refused("scope", "free prompts are outside the token scope".into()));
            }
            if prompt.trim().is_empty() {
                return Err(ApiError::InvalidArgument("prompt is empty".into()));
            }
            if state.agents.is_none() {
                return Err(ApiError::Refused("unavailable", "free prompts need a configured backend".into()));
            }
            let (agents, excluded) = state.bank.select(req.agents.as_deref())?;
            let ids: Vec<String> = agents.into_iter().map(|a| a.agent_id.clone()).collect();
            let st = Arc::clone(&state);
            let p = prompt.clone();
            let results = tokio::task::spawn_blocking(move || {
                let rt = st.agents.as_ref().expect("checked above");
                ids.iter()
                    .map(|id| {
                        rt.respond(id, &p).map(|r| IndividualResult {
                            agent_id: id.clone(),
                            answer: None,
                            response: Some(r),
                        })
                    })
                    .collect::<Result<Vec<_>, ApiError>>()
            })
            .await
            .map_err(|e| ApiError::Internal(e.to_string()))??;
            Ok(served(StatusCode::OK, results.len(), json!({ "excluded_count": excluded, "results": results })))
        }
        _ => Err(ApiError::InvalidArgument("give exactly one of `task_id` and `prompt`".into())),
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProposalRequest {
    text: String,
}

async fn submit_proposal(
    State(state): State<Arc<AppState>>,
    Json(req): Json<ProposalRequest>,
) -> Result<Response, ApiError> {
    if req.text.trim().is_empty() {
        return Err(ApiError::InvalidArgument("proposal text is empty".into()));
    }
    let mut all = state.proposals.lock().expect("proposals poisoned");
    let p = Proposal {
        proposal_id: format!("prop-{:04}", all.len() + 1),
        text: req.text,
        submitted_at: Utc::now().to_rfc3339_opts(SecondsFormat::Secs, true),
        status: "pending".into(),
    };
    if let Some(path) = &state.proposals_path {
        use std::io::Write;
        let line = serde_json::to_string(&p).expect("proposal serializes") + "\n";
        std::fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .and_then(|mut f| f.write_all(line.as_bytes()))
            .map_err(|e| ApiError::Internal(format!("storing proposal: {e}")))?;
    }
    all.push(p.clone());
    Ok(served(StatusCode::CREATED, 1, json!({ "proposal_id": p.proposal_id, "status": p.status })))
}

async fn list_proposals(State(state): State<Arc<AppState>>) -> Response {
    let all = state.proposals();
    served(StatusCode::OK, all.len(), json!({ "proposals": all }))
}
