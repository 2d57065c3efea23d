//! Offline backends whose answers are known by construction.

use std::sync::Arc;
use std::time::Instant;

use sha2::{Digest, Sha256};

use crate::agent::prompts::QUESTIONS_HEADER;
use crate::agent::{answer_text, query_for, Query};
use crate::battery::{Battery, ItemKind};
use crate::corpus::{AnswerValue, ResponseSet};
use crate::interviewer::prompts::{OBJECTIVE_MARKER, UTTERANCE_MARKER};
use crate::llm::{CallLog, ChatBackend, ChatRequest, LlmError};

const REFLECTION_REPLY: &str =
    "- The participant answers questions directly.\n- The participant talks about work and family.";

/// Replies shared by the oracle backends for everything but predictions.
fn auxiliary_reply(tag: &str) -> Option<String> {
    if tag == "classify" {
        Some("demographer".into())
    } else if tag.starts_with("reflect:") || tag == "interviewer.reflection" {
        Some(REFLECTION_REPLY.into())
    } else if tag == "summarize" {
        Some("- summary: the participant described their life, work and family".into())
    } else if tag == "respond" {
        Some("Response: I would need to think about that.".into())
    } else if tag == "interviewer.action" {
        Some(format!("{OBJECTIVE_MARKER} yes\n{UTTERANCE_MARKER} Thank you."))
    } else {
        None
    }
}

fn no_rule(req: &ChatRequest) -> LlmError {
    LlmError::NoRule { tag: req.tag.clone(), excerpt: req.concatenated_text().chars().take(80).collect() }
}

fn logged(log: &CallLog, req: &ChatRequest, f: impl FnOnce() -> Result<String, LlmError>) -> Result<String, LlmError> {
    req.validate()?;
    let started = Instant::now();
    let out = f();
    log.record(&req.tag, 1, started.elapsed(), &req.prompt_hash(), if out.is_ok() { "ok" } else { "no-rule" });
    out
}

/// Predicts each item with the subject's own first-phase answer.
pub struct EchoBackend {
    answers: ResponseSet,
    batteries: Arc<Vec<Battery>>,
    log: CallLog,
}

impl EchoBackend {
    pub fn new(answers: ResponseSet, batteries: Arc<Vec<Battery>>) -> Self {
        Self { answers, batteries, log: CallLog::new() }
    }

    fn predict(&self, item_id: &str) -> Option<String> {
        let (battery, item) = self.batteries.iter().find_map(|b| b.item(item_id).map(|i| (b, i)))?;
        let answer = match &item.kind {
            // any condition of the experiment: a person answers only one
            ItemKind::Experiment { exp_id, .. } => {
                let prefix = format!("{}:", exp_id.as_str());
                self.answers.answers.iter().find(|(k, _)| k.starts_with(&prefix)).map(|(_, v)| v)?
            }
            _ => self.answers.get(item_id)?,
        };
        let text = match (query_for(item, battery).ok()?, answer) {
            (Query::Categorical { options, .. }, AnswerValue::Choice(c)) => {
                options.into_iter().find(|o| o.eq_ignore_ascii_case(c))?
            }
            _ => answer_text(item, battery, answer)?,
        };
        Some(format!("Reasoning: this is what the participant said before.\nResponse: {text}"))
    }
}

impl ChatBackend for EchoBackend {
    fn complete(&self, req: &ChatRequest) -> Result<String, LlmError> {
        logged(&self.log, req, || {
            if let Some(r) = auxiliary_reply(&req.tag) {
                return Ok(r);
            }
            req.tag.strip_prefix("predict:").and_then(|id| self.predict(id)).ok_or_else(|| no_rule(req))
        })
    }

    fn call_log(&self) -> CallLog {
        self.log.clone()
    }
}

/// Uniform draw in [0, 1) from SHA-256 of the seed and prompt text.
pub fn hash_unit(seed: u64, text: &str) -> f64 {
    let digest = Sha256::digest(format!("{seed}\n{text}").as_bytes());
    let word = u64::from_be_bytes(digest[..8].try_into().expect("digest has 32 bytes"));
    (word >> 11) as f64 / (1u64 << 53) as f64
}

/// What the question block of a prediction prompt offers.
#[derive(Debug, Clone, PartialEq)]
pub enum Offer {
    Options(usize),
    Range(f64, f64),
}

/// Reads the option count or numeric range from a prediction prompt.
pub fn parse_offer(prompt: &str) -> Option<Offer> {
    let block = &prompt[prompt.rfind(QUESTIONS_HEADER)?..];
    if let Some(at) = block.find("\nOptions:") {
        let n = block[at + 9..]
            .lines()
            .skip(1)
            .take_while(|l| {
                let digits = l.chars().take_while(|c| c.is_ascii_digit()).count();
                digits > 0 && l[digits..].starts_with(") ")
            })
            .count();
        return (n > 0).then_some(Offer::Options(n));
    }
    let line = block.lines().find_map(|l| l.strip_prefix("Range: "))?;
    let (a, b) = line.split_once(" to ")?;
    Some(Offer::Range(a.trim().parse().ok()?, b.trim().parse().ok()?))
}

/// Answers predictions uniformly at random, keyed by prompt so that results do
/// not depend on call order.
pub struct UniformBackend {
    seed: u64,
    log: CallLog,
}

impl UniformBackend {
    pub fn new(seed: u64) -> Self {
        Self { seed, log: CallLog::new() }
    }
}

impl ChatBackend for UniformBackend {
    fn complete(&self, req: &ChatRequest) -> Result<String, LlmError> {
        logged(&self.log, req, || {
            if let Some(r) = auxiliary_reply(&req.tag) {
                return Ok(r);
            }
            let prompt = req.concatenated_text();
            let u = hash_unit(self.seed, &prompt);
            match parse_offer(&prompt) {
                Some(Offer::Options(k)) => Ok(format!("Response: {}", (u * k as f64) as usize + 1)),
                Some(Offer::Range(a, b)) => Ok(format!("Response: {}", a + u * (b - a))),
                None => Err(no_rule(req)),
            }
        })
    }

    fn call_log(&self) -> CallLog {
        self.log.clone()
    }
}
