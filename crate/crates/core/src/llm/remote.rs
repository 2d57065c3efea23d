use std::time::{Duration, Instant};

use rand::Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{truncate_chars, CallLog, ChatBackend, ChatRequest, LlmError, RateLimiter};

pub const ENV_API_BASE: &str = "AGENTBANK_API_BASE";
pub const ENV_API_KEY: &str = "AGENTBANK_API_KEY";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub base_delay_ms: u64,
    pub jitter: bool,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self { max_attempts: 5, base_delay_ms: 500, jitter: true }
    }
}

impl RetryPolicy {
    /// Delay before attempt `attempt + 1`, doubling from the base delay.
    pub fn delay(&self, attempt: u32) -> Duration {
        let base = self.base_delay_ms.saturating_mul(1u64 << (attempt - 1).min(16));
        let ms = if self.jitter { rand::thread_rng().gen_range(base / 2..=base) } else { base };
        Duration::from_millis(ms)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RemoteConfig {
    pub base_url: String,
    #[serde(default, skip_serializing)]
    pub api_key: Option<String>,
    pub model: String,
    #[serde(default)]
    pub retry: RetryPolicy,
    #[serde(default = "default_timeout")]
    pub timeout_secs: u64,
    /// Token bucket (capacity, refill per second); `None` disables limiting.
    #[serde(default)]
    pub rate_limit: Option<(u32, f64)>,
}

fn default_timeout() -> u64 {
    120
}

impl RemoteConfig {
    pub fn from_env(model: impl Into<String>) -> Result<Self, LlmError> {
        let base_url =
            std::env::var(ENV_API_BASE).map_err(|_| LlmError::Config(format!("{ENV_API_BASE} is not set")))?;
        Ok(Self {
            base_url,
            api_key: std::env::var(ENV_API_KEY).ok(),
            model: model.into(),
            retry: RetryPolicy::default(),
            timeout_secs: default_timeout(),
            rate_limit: None,
        })
    }
}

#[derive(Deserialize)]
struct CompletionBody {
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    message: ChoiceMessage,
}

#[derive(Deserialize)]
struct ChoiceMessage {
    content: Option<String>,
}

enum AttemptError {
    Retryable(String),
    Fatal(String),
}

/// OpenAI-compatible `POST /v1/chat/completions` client with retry and rate limiting.
pub struct RemoteBackend {
    config: RemoteConfig,
    client: reqwest::blocking::Client,
    limiter: Option<RateLimiter>,
    log: CallLog,
}

impl RemoteBackend {
    pub fn new(config: RemoteConfig) -> Result<Self, LlmError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(config.timeout_secs))
            .build()
            .map_err(|e| LlmError::Config(e.to_string()))?;
        let limiter = config.rate_limit.map(|(cap, rate)| RateLimiter::new(cap, rate));
        Ok(Self { config, client, limiter, log: CallLog::new() })
    }

    fn endpoint(&self) -> String {
        format!("{}/v1/chat/completions", self.config.base_url.trim_end_matches('/'))
    }

    fn attempt(&self, req: &ChatRequest) -> Result<String, (u16, AttemptError)> {
        let body = json!({
            "model": self.config.model,
            "messages": req.messages,
            "temperature": req.temperature,
            // rough chars-per-token budget; the reply is truncated to max_output_chars anyway
            "max_tokens": req.max_output_chars.div_ceil(3),
        });
        let mut builder = self.client.post(self.endpoint()).json(&body);
        if let Some(key) = &self.config.api_key {
            builder = builder.bearer_auth(key);
        }
        let resp = builder.send().map_err(|e| {
            let retryable = e.is_timeout() || e.is_connect() || e.is_request();
            let msg = e.to_string();
            (0, if retryable { AttemptError::Retryable(msg) } else { AttemptError::Fatal(msg) })
        })?;
        let status = resp.status().as_u16();
        if !resp.status().is_success() {
            let text = resp.text().unwrap_or_default();
            let msg = format!("HTTP {status}: {}", truncate_chars(&text, 200));
            let retryable = matches!(status, 408 | 429) || status >= 500;
            return Err((status, if retryable { AttemptError::Retryable(msg) } else { AttemptError::Fatal(msg) }));
        }
        let parsed: CompletionBody =
            resp.json().map_err(|e| (status, AttemptError::Fatal(format!("malformed completion body: {e}"))))?;
        parsed
            .choices
            .into_iter()
            .next()
            .and_then(|c| c.message.content)
            .ok_or((status, AttemptError::Fatal("completion has no content".into())))
    }
}

impl ChatBackend for RemoteBackend {
    fn complete(&self, req: &ChatRequest) -> Result<String, LlmError> {
        req.validate()?;
        let hash = req.prompt_hash();
        let max = self.config.retry.max_attempts.max(1);
        let mut last = String::new();
        for attempt in 1..=max {
            if let Some(limiter) = &self.limiter {
                limiter.acquire();
            }
            let started = Instant::now();
            match self.attempt(req) {
                Ok(text) => {
                    self.log.record(&req.tag, attempt, started.elapsed(), &hash, "ok");
                    return Ok(truncate_chars(&text, req.max_output_chars));
                }
                Err((status, err)) => {
                    let outcome = if status == 0 { "network".to_string() } else { format!("http {status}") };
                    self.log.record(&req.tag, attempt, started.elapsed(), &hash, outcome);
                    match err {
                        AttemptError::Fatal(msg) => {
                            return Err(LlmError::Transport { attempts: attempt, message: msg })
                        }
                        AttemptError::Retryable(msg) => {
                            tracing::warn!(tag = %req.tag, attempt, "retryable backend failure: {msg}");
                            last = msg;
                            if attempt < max {
                                std::thread::sleep(self.config.retry.delay(attempt));
                            }
                        }
                    }
                }
            }
        }
        Err(LlmError::Transport { attempts: max, message: last })
    }

    fn call_log(&self) -> CallLog {
        self.log.clone()
    }
}
