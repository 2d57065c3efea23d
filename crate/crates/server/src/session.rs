//! Interview sessions over HTTP, for the browser interface and the CLI.

use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::{Arc, Mutex};

use agentbank::interviewer::{
    checkpoint_path, resume, ActionKind, InterviewError, InterviewScript, Interviewer, InterviewerAction,
    InterviewerConfig, SessionState,
};
use agentbank::llm::{ChatBackend, LlmError};
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::Response;
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};

use crate::api::{backend_failure, served, ApiError, AppState};

pub struct Interviews {
    pub backend: Arc<dyn ChatBackend>,
    pub script: InterviewScript,
    pub config: InterviewerConfig,
    pub session_dir: PathBuf,
    sessions: Mutex<HashMap<String, Arc<Mutex<Live>>>>,
}

struct Live {
    state: SessionState,
    action: InterviewerAction,
    paused: bool,
}

/// What the interface shows; never more than the interviewer's own words.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionView {
    pub session_id: String,
    pub kind: ActionKind,
    pub current_utterance: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub preamble: Vec<String>,
    pub question_index: usize,
    pub total: usize,
    pub progress_fraction: f64,
    pub checkpoint_index: usize,
    pub paused: bool,
    pub finished: bool,
}

impl Interviews {
    pub fn new(
        backend: Arc<dyn ChatBackend>,
        script: InterviewScript,
        config: InterviewerConfig,
        session_dir: PathBuf,
    ) -> Self {
        Self { backend, script, config, session_dir, sessions: Mutex::new(HashMap::new()) }
    }

    fn interviewer(&self, session_id: &str) -> Interviewer<Arc<dyn ChatBackend>> {
        let mut config = self.config.clone();
        config.checkpoint_dir = Some(self.session_dir.join(session_id));
        Interviewer::new(Arc::clone(&self.backend), config)
    }

    fn get(&self, id: &str) -> Result<Arc<Mutex<Live>>, ApiError> {
        self.sessions
            .lock()
            .expect("sessions poisoned")
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::NotFound(format!("no session `{id}`")))
    }

    pub fn len(&self) -> usize {
        self.sessions.lock().expect("sessions poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

fn view(id: &str, live: &Live) -> SessionView {
    let s = &live.state;
    let total = s.script.len();
    let index = if live.paused { s.checkpoint_index } else { s.current_question_index };
    SessionView {
        session_id: id.into(),
        kind: live.action.kind,
        current_utterance: if live.paused { String::new() } else { live.action.utterance.clone() },
        preamble: if live.paused { vec![] } else { live.action.preamble.clone() },
        question_index: index,
        total,
        progress_fraction: index as f64 / total as f64,
        checkpoint_index: s.checkpoint_index,
        paused: live.paused,
        finished: s.finished,
    }
}

fn api_error(e: InterviewError) -> ApiError {
    match e {
        InterviewError::InvalidArgument(m) => ApiError::InvalidArgument(m),
        InterviewError::Finished => ApiError::Conflict("session already finished".into()),
        InterviewError::Backend(e @ (LlmError::Transport { .. } | LlmError::NoRule { .. })) => {
            backend_failure("interviewer", e)
        }
        e => {
            tracing::warn!(error = %e, "interview step failed");
            ApiError::Internal("interview step failed".into())
        }
    }
}

pub(crate) fn routes() -> Router<Arc<AppState>> {
    Router::new()
        .route("/session", post(create))
        .route("/session/{id}/next", get(next))
        .route("/session/{id}/answer", post(answer))
        .route("/session/{id}/pause", post(pause))
}

fn interviews(state: &AppState) -> Result<&Interviews, ApiError> {
    state.interviews.as_ref().ok_or_else(|| ApiError::NotFound("interview sessions are not enabled".into()))
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> Result<T, ApiError> + Send + 'static) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(f).await.map_err(|e| ApiError::Internal(e.to_string()))?
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CreateRequest {
    participant_id: String,
}

async fn create(State(state): State<Arc<AppState>>, Json(req): Json<CreateRequest>) -> Result<Response, ApiError> {
    interviews(&state)?;
    if req.participant_id.trim().is_empty() {
        return Err(ApiError::InvalidArgument("participant_id is empty".into()));
    }
    let id = uuid::Uuid::new_v4().simple().to_string();
    let st = Arc::clone(&state);
    let sid = id.clone();
    let v = blocking(move || {
        let iv = interviews(&st)?;
        let (s, action) =
            iv.interviewer(&sid).begin_session(iv.script.clone(), &req.participant_id).map_err(api_error)?;
        let live = Live { state: s, action, paused: false };
        let v = view(&sid, &live);
        iv.sessions.lock().expect("sessions poisoned").insert(sid.clone(), Arc::new(Mutex::new(live)));
        Ok(v)
    })
    .await?;
    Ok(served(StatusCode::CREATED, 1, v))
}

async fn next(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let live = interviews(&state)?.get(&id)?;
    let st = Arc::clone(&state);
    let v = blocking(move || {
        let iv = interviews(&st)?;
        let mut live = live.lock().expect("session poisoned");
        if live.paused {
            live.state =
                resume(&checkpoint_path(&iv.session_dir.join(&id), &live.state.participant_id)).map_err(api_error)?;
            live.paused = false;
        }
        let action = iv.interviewer(&id).next_action(&mut live.state).map_err(api_error)?;
        live.action = action;
        Ok(view(&id, &live))
    })
    .await?;
    Ok(served(StatusCode::OK, 1, v))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct AnswerRequest {
    text: String,
    answer_seconds: f64,
}

async fn answer(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    Json(req): Json<AnswerRequest>,
) -> Result<Response, ApiError> {
    if req.text.trim().is_empty() {
        return Err(ApiError::InvalidArgument("answer text is empty".into()));
    }
    let live = interviews(&state)?.get(&id)?;
    let st = Arc::clone(&state);
    let v = blocking(move || {
        let iv = interviews(&st)?;
        let mut live = live.lock().expect("session poisoned");
        if live.paused {
            return Err(ApiError::Conflict("session is paused; fetch the next action to resume".into()));
        }
        match iv.interviewer(&id).submit_answer(&mut live.state, &req.text, req.answer_seconds) {
            Ok(action) => {
                live.action = action;
                Ok(view(&id, &live))
            }
            Err(e) => {
                // back to the last checkpoint so the block can be retried
                if matches!(e, InterviewError::Backend(_)) {
                    let path = checkpoint_path(&iv.session_dir.join(&id), &live.state.participant_id);
                    if let Ok(s) = resume(&path) {
                        live.state = s;
                        live.paused = true;
                    }
                }
                Err(api_error(e))
            }
        }
    })
    .await?;
    Ok(served(StatusCode::OK, 1, v))
}

async fn pause(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let live = interviews(&state)?.get(&id)?;
    let mut live = live.lock().expect("session poisoned");
    live.paused = true;
    Ok(served(StatusCode::OK, 1, view(&id, &live)))
}
