use std::collections::BTreeMap;

use super::prompts::{CLASSIFY_TEMPLATE, REFLECTION_TEMPLATE};
use super::{fill_template, invalid, AgentError, Expert};
use crate::corpus::InterviewTranscript;
use crate::llm::{ChatBackend, ChatRequest};

pub const MAX_OBSERVATIONS: usize = 20;

/// Splits a reflection reply into observation strings, dropping bullet and
/// numbering marks, capped at [`MAX_OBSERVATIONS`].
pub fn parse_observations(reply: &str) -> Vec<String> {
    reply
        .lines()
        .map(|l| {
            let l = l.trim();
            let l = l.trim_start_matches(['-', '*', '•']).trim_start();
            let digits = l.chars().take_while(|c| c.is_ascii_digit()).count();
            if digits > 0 && l[digits..].starts_with(['.', ')']) {
                l[digits + 1..].trim_start()
            } else {
                l
            }
        })
        .filter(|l| !l.is_empty())
        .take(MAX_OBSERVATIONS)
        .map(str::to_string)
        .collect()
}

/// One call per expert. Any transport error discards the partial result.
pub fn generate_expert_reflections<B: ChatBackend>(
    transcript: &InterviewTranscript,
    backend: &B,
) -> Result<BTreeMap<Expert, Vec<String>>, AgentError> {
    if transcript.is_empty() {
        return Err(invalid("transcript is empty"));
    }
    let text = transcript.render();
    let mut out = BTreeMap::new();
    for e in Expert::ALL {
        let prompt = fill_template(
            REFLECTION_TEMPLATE,
            &[("transcript", text.trim_end()), ("expert", e.name()), ("topic", e.topic())],
        );
        let reply = backend.complete(&ChatRequest::user(format!("reflect:{}", e.name()), prompt))?;
        out.insert(e, parse_observations(&reply));
    }
    Ok(out)
}

/// The expert named earliest in `reply`, if any.
pub fn parse_expert(reply: &str) -> Option<Expert> {
    let norm = reply.to_lowercase().replace(['_', '-'], " ").replace("behavioural", "behavioral");
    Expert::ALL
        .iter()
        .filter_map(|e| norm.find(e.name()).map(|pos| (pos, *e)))
        .min_by_key(|(pos, _)| *pos)
        .map(|(_, e)| e)
}

/// Asks which expert fits a question; one retry, then `None` (all experts).
pub fn classify_expert<B: ChatBackend>(question: &str, backend: &B) -> Result<Option<Expert>, AgentError> {
    if question.trim().is_empty() {
        return Err(invalid("question text is empty"));
    }
    let req = ChatRequest::user("classify", fill_template(CLASSIFY_TEMPLATE, &[("question", question)]));
    for _ in 0..2 {
        if let Some(e) = parse_expert(&backend.complete(&req)?) {
            return Ok(Some(e));
        }
    }
    Ok(None)
}
