use std::path::Path;
use std::sync::Mutex;
use std::time::Instant;

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::{truncate_chars, CallLog, ChatBackend, ChatRequest, LlmError};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Matcher {
    /// Substring of the concatenated request text.
    Contains(String),
    /// Regular expression over the concatenated request text (use `^`/`$` to anchor).
    Pattern(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MockRule {
    pub matcher: Matcher,
    pub response: String,
    /// `None` means unlimited.
    #[serde(default)]
    pub max_uses: Option<u32>,
}

impl MockRule {
    pub fn contains(needle: impl Into<String>, response: impl Into<String>) -> Self {
        Self { matcher: Matcher::Contains(needle.into()), response: response.into(), max_uses: None }
    }

    pub fn limited(mut self, uses: u32) -> Self {
        self.max_uses = Some(uses);
        self
    }
}

enum CompiledMatcher {
    Contains(String),
    Pattern(Regex),
}

struct RuleState {
    matcher: CompiledMatcher,
    rule: MockRule,
    uses: u32,
}

/// Deterministic backend answering from an ordered rule list; the first rule
/// whose matcher hits (and that has uses left) wins.
pub struct ScriptedMock {
    rules: Mutex<Vec<RuleState>>,
    log: CallLog,
}

impl ScriptedMock {
    pub fn new(rules: Vec<MockRule>) -> Result<Self, LlmError> {
        let states = rules
            .into_iter()
            .map(|rule| {
                let matcher = match &rule.matcher {
                    Matcher::Contains(s) => CompiledMatcher::Contains(s.clone()),
                    Matcher::Pattern(p) => CompiledMatcher::Pattern(
                        Regex::new(p).map_err(|e| LlmError::Config(format!("bad pattern `{p}`: {e}")))?,
                    ),
                };
                Ok(RuleState { matcher, rule, uses: 0 })
            })
            .collect::<Result<Vec<_>, LlmError>>()?;
        Ok(Self { rules: Mutex::new(states), log: CallLog::new() })
    }

    pub fn from_json(text: &str) -> Result<Self, LlmError> {
        let rules: Vec<MockRule> =
            serde_json::from_str(text).map_err(|e| LlmError::Config(format!("mock script: {e}")))?;
        Self::new(rules)
    }

    pub fn from_file(path: &Path) -> Result<Self, LlmError> {
        let text = std::fs::read_to_string(path).map_err(|e| LlmError::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Number of times each rule has fired, in declaration order.
    pub fn use_counts(&self) -> Vec<u32> {
        self.rules.lock().expect("mock poisoned").iter().map(|r| r.uses).collect()
    }
}

impl ChatBackend for ScriptedMock {
    fn complete(&self, req: &ChatRequest) -> Result<String, LlmError> {
        req.validate()?;
        let started = Instant::now();
        let text = req.concatenated_text();
        let hash = super::prompt_hash(&text);
        let mut rules = self.rules.lock().expect("mock poisoned");
        let hit = rules.iter_mut().find(|r| {
            let exhausted = r.rule.max_uses.is_some_and(|m| r.uses >= m);
            !exhausted
                && match &r.matcher {
                    CompiledMatcher::Contains(s) => text.contains(s.as_str()),
                    CompiledMatcher::Pattern(re) => re.is_match(&text),
                }
        });
        match hit {
            Some(rule) => {
                rule.uses += 1;
                let out = truncate_chars(&rule.rule.response, req.max_output_chars);
                self.log.record(&req.tag, 1, started.elapsed(), &hash, "ok");
                Ok(out)
            }
            None => {
                self.log.record(&req.tag, 1, started.elapsed(), &hash, "no-rule");
                Err(LlmError::NoRule { tag: req.tag.clone(), excerpt: truncate_chars(&text, 120) })
            }
        }
    }

    fn call_log(&self) -> CallLog {
        self.log.clone()
    }
}

type ResponderFn = dyn Fn(&ChatRequest) -> Result<String, LlmError> + Send + Sync;

/// Programmable mock: a pure function of the request. Useful for oracle
/// backends whose answers depend on the request tag.
pub struct FnBackend {
    responder: Box<ResponderFn>,
    log: CallLog,
}

impl FnBackend {
    pub fn new(f: impl Fn(&ChatRequest) -> Result<String, LlmError> + Send + Sync + 'static) -> Self {
        Self { responder: Box::new(f), log: CallLog::new() }
    }
}

impl ChatBackend for FnBackend {
    fn complete(&self, req: &ChatRequest) -> Result<String, LlmError> {
        req.validate()?;
        let started = Instant::now();
        let result = (self.responder)(req);
        let outcome = if result.is_ok() { "ok" } else { "error" };
        self.log.record(&req.tag, 1, started.elapsed(), &req.prompt_hash(), outcome);
        result.map(|s| truncate_chars(&s, req.max_output_chars))
    }

    fn call_log(&self) -> CallLog {
        self.log.clone()
    }
}
