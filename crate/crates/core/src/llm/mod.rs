//! Chat-completion abstraction.
//!
//! Every language-model call in the crate goes through [`ChatBackend`]. Two
//! implementations ship: [`RemoteBackend`] speaks the OpenAI-compatible
//! chat-completions wire format, and [`ScriptedMock`] answers from an ordered
//! rule list so that every stage can run offline and deterministically.

mod mock;
mod ratelimit;
mod remote;

use std::sync::{Arc, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use mock::{FnBackend, Matcher, MockRule, ScriptedMock};
pub use ratelimit::RateLimiter;
pub use remote::{RemoteBackend, RemoteConfig, RetryPolicy, ENV_API_BASE, ENV_API_KEY};

/// Default temperature for predictions.
pub const DEFAULT_TEMPERATURE: f64 = 0.0;
pub const DEFAULT_MAX_OUTPUT_CHARS: usize = 8_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub messages: Vec<ChatMessage>,
    pub temperature: f64,
    pub max_output_chars: usize,
    /// Caller-supplied label recorded in the call log.
    pub tag: String,
}

impl ChatRequest {
    /// A single user message with default decoding settings.
    pub fn user(tag: impl Into<String>, text: impl Into<String>) -> Self {
        Self {
            messages: vec![ChatMessage { role: Role::User, content: text.into() }],
            temperature: DEFAULT_TEMPERATURE,
            max_output_chars: DEFAULT_MAX_OUTPUT_CHARS,
            tag: tag.into(),
        }
    }

    pub fn validate(&self) -> Result<(), LlmError> {
        if self.messages.is_empty() {
            return Err(LlmError::InvalidRequest("request has no messages".into()));
        }
        if !(self.temperature >= 0.0) {
            return Err(LlmError::InvalidRequest("temperature must be >= 0".into()));
        }
        if self.max_output_chars == 0 {
            return Err(LlmError::InvalidRequest("max_output_chars must be positive".into()));
        }
        Ok(())
    }

    /// All message contents joined by newlines; what mock matchers see.
    pub fn concatenated_text(&self) -> String {
        self.messages.iter().map(|m| m.content.as_str()).collect::<Vec<_>>().join("\n")
    }

    pub fn prompt_hash(&self) -> String {
        prompt_hash(&self.concatenated_text())
    }
}

/// First 16 hex digits of the SHA-256 of `text`.
pub fn prompt_hash(text: &str) -> String {
    let digest = Sha256::digest(text.as_bytes());
    digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Error)]
pub enum LlmError {
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("transport error after {attempts} attempt(s): {message}")]
    Transport { attempts: u32, message: String },
    #[error("no mock rule matched request `{tag}`: {excerpt}")]
    NoRule { tag: String, excerpt: String },
    #[error("backend configuration: {0}")]
    Config(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CallRecord {
    pub tag: String,
    pub attempt: u32,
    pub latency_ms: f64,
    pub prompt_hash: String,
    pub outcome: String,
}

/// Shared, append-only log of backend calls.
#[derive(Debug, Clone, Default)]
pub struct CallLog(Arc<Mutex<Vec<CallRecord>>>);

impl CallLog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(&self, tag: &str, attempt: u32, latency: Duration, hash: &str, outcome: impl Into<String>) {
        self.0.lock().expect("call log poisoned").push(CallRecord {
            tag: tag.to_string(),
            attempt,
            latency_ms: latency.as_secs_f64() * 1e3,
            prompt_hash: hash.to_string(),
            outcome: outcome.into(),
        });
    }

    pub fn records(&self) -> Vec<CallRecord> {
        self.0.lock().expect("call log poisoned").clone()
    }

    pub fn len(&self) -> usize {
        self.0.lock().expect("call log poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

pub trait ChatBackend: Send + Sync {
    fn complete(&self, req: &ChatRequest) -> Result<String, LlmError>;

    fn call_log(&self) -> CallLog;
}

impl<T: ChatBackend + ?Sized> ChatBackend for Arc<T> {
    fn complete(&self, req: &ChatRequest) -> Result<String, LlmError> {
        (**self).complete(req)
    }

    fn call_log(&self) -> CallLog {
        (**self).call_log()
    }
}

impl<T: ChatBackend + ?Sized> ChatBackend for &T {
    fn complete(&self, req: &ChatRequest) -> Result<String, LlmError> {
        (**self).complete(req)
    }

    fn call_log(&self) -> CallLog {
        (**self).call_log()
    }
}

pub(crate) fn truncate_chars(s: &str, max: usize) -> String {
    match s.char_indices().nth(max) {
        Some((idx, _)) => s[..idx].to_string(),
        None => s.to_string(),
    }
}
