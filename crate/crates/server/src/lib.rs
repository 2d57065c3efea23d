//! HTTP service over an agent bank: open aggregate queries on fixed tasks,
//! token-gated individual queries, research proposals and an append-only
//! audit log. It also hosts interview sessions for the browser interface.

mod api;
pub mod audit;
pub mod bank;
pub mod config;
pub mod session;
pub mod tokens;

use std::path::PathBuf;
use std::sync::Arc;

use agentbank::corpus::{CorpusDir, CorpusError};
use agentbank::interviewer::{InterviewScript, InterviewerConfig};
use agentbank::runner::{load_battery, Backends, Population, RunnerError};
use thiserror::Error;

pub use api::{router, AgentRuntime, ApiError, AppState, Proposal};
pub use audit::{read_audit, AuditLog, AuditRecord, Decision};
pub use bank::{answers_from_traces, read_withdrawn_ids, AgentBank, AggregateResult, AggregateValue, Filter, Task};
pub use config::BankConfig;
pub use session::{Interviews, SessionView};
pub use tokens::{hash_secret, AccessToken, Tier, TokenStore};

#[derive(Debug, Error)]
pub enum ServerError {
    #[error("configuration: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Runner(#[from] RunnerError),
}

/// Loads everything `config` names and assembles the shared state.
pub fn build_state(config: &BankConfig) -> Result<Arc<AppState>, ServerError> {
    let batteries = config.batteries.iter().map(|b| load_battery(b)).collect::<Result<Vec<_>, _>>()?;
    let corpus = CorpusDir::new(&config.corpus);
    let table = corpus.participants()?;
    let answers = match &config.predictions {
        Some(p) => answers_from_traces(p, &config.condition)?,
        None => Default::default(),
    };
    let withdrawn = match &config.withdrawn_ids {
        Some(p) => read_withdrawn_ids(p)?,
        None => Default::default(),
    };
    let bank = AgentBank::new(&table, answers, &batteries, &withdrawn)?;
    let tokens = TokenStore::load(&config.tokens)?;
    let audit = AuditLog::open(&config.audit_log)?;
    let mut state = AppState::new(bank, tokens, audit, config.k_min);
    if let Some(p) = &config.proposals {
        state = state.with_proposal_file(p.clone())?;
    }
    if let Some(spec) = &config.backend {
        let backends = Backends::build(spec, &batteries, config.seed)?;
        let variant = config.condition.parse().map_err(|e| ServerError::Config(format!("condition: {e}")))?;
        let mut population = Population::load(&corpus)?;
        population.subjects.retain(|s| !withdrawn.contains(s.id()));
        if let Some(script) = &config.script {
            let script = InterviewScript::load(script).map_err(|e| ServerError::Config(format!("script: {e}")))?;
            state.interviews = Some(Interviews::new(
                backends.conversational(),
                script,
                InterviewerConfig::default(),
                config.session_dir.clone(),
            ));
        }
        state.agents = Some(AgentRuntime::new(population, batteries, backends, variant, config.seed));
    }
    Ok(Arc::new(state))
}

/// Serves until Ctrl-C.
pub fn serve(config: &BankConfig) -> Result<(), ServerError> {
    let state = build_state(config)?;
    let addr = format!("{}:{}", config.host, config.port);
    let rt = tokio::runtime::Runtime::new().map_err(|source| ServerError::Io { path: PathBuf::from(&addr), source })?;
    rt.block_on(async move {
        let listener = tokio::net::TcpListener::bind(&addr)
            .await
            .map_err(|source| ServerError::Io { path: PathBuf::from(&addr), source })?;
        tracing::info!(%addr, agents = state.bank.agents.len(), "agent bank listening");
        axum::serve(listener, router(state))
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await
            .map_err(|source| ServerError::Io { path: PathBuf::from(&addr), source })
    })
}
