//! Semi-structured interview engine.
//!
//! A session walks an ordered [`InterviewScript`]. Each block opens with the
//! scripted question verbatim; afterwards the backend decides between a
//! follow-up and moving on, until the block's time budget runs out. Zero-limit
//! entries are spoken without waiting for an answer. Sessions checkpoint at
//! every block boundary.

pub mod prompts;
mod simulate;

use std::collections::HashSet;
use std::path::{Path, PathBuf};
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{load_json, store_json, CorpusError, InterviewTranscript, Speaker};
use crate::llm::{ChatBackend, ChatRequest, LlmError};
use prompts::{fill, ACTION_TEMPLATE, DECISION_SUFFIX, OBJECTIVE_MARKER, REFLECTION_TEMPLATE, UTTERANCE_MARKER};

pub use simulate::{run_simulated, SimulatedInterviewee};

#[derive(Debug, Error)]
pub enum InterviewError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("session already finished")]
    Finished,
    #[error(transparent)]
    Backend(#[from] LlmError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScriptQuestion {
    pub id: String,
    pub text: String,
    pub time_limit_sec: f64,
    /// Learning objective shown to the model; defaults to the question text.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub objective: Option<String>,
}

impl ScriptQuestion {
    pub fn new(id: impl Into<String>, text: impl Into<String>, time_limit_sec: f64) -> Self {
        Self { id: id.into(), text: text.into(), time_limit_sec, objective: None }
    }

    pub fn is_interactive(&self) -> bool {
        self.time_limit_sec > 0.0
    }
}

/// Serialized as a bare JSON array of questions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct InterviewScript {
    pub questions: Vec<ScriptQuestion>,
}

impl InterviewScript {
    pub fn new(questions: Vec<ScriptQuestion>) -> Result<Self, InterviewError> {
        let s = Self { questions };
        s.validate()?;
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self, InterviewError> {
        let s: Self = load_json(path)?;
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<(), InterviewError> {
        if self.questions.is_empty() {
            return Err(InterviewError::InvalidArgument("script has no questions".into()));
        }
        let mut seen = HashSet::new();
        for q in &self.questions {
            if !seen.insert(q.id.as_str()) {
                return Err(InterviewError::InvalidArgument(format!("duplicate question id `{}`", q.id)));
            }
            if !(q.time_limit_sec >= 0.0) {
                return Err(InterviewError::InvalidArgument(format!("question `{}` has a negative time limit", q.id)));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.questions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.questions.is_empty()
    }

    pub fn total_budget(&self) -> f64 {
        self.questions.iter().map(|q| q.time_limit_sec).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionKind {
    AskScripted,
    FollowUp,
    Advance,
    Finish,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterviewerAction {
    pub kind: ActionKind,
    /// Empty for `advance` and `finish`.
    pub utterance: String,
    /// Zero-limit script entries spoken before `utterance`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub preamble: Vec<String>,
    pub question_index: usize,
}

impl InterviewerAction {
    fn new(kind: ActionKind, utterance: impl Into<String>, question_index: usize) -> Self {
        Self { kind, utterance: utterance.into(), preamble: Vec::new(), question_index }
    }
}

/// A reflection note; `key` is `None` for output that could not be parsed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Note {
    pub key: Option<String>,
    pub value: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockTiming {
    pub question_id: String,
    pub elapsed_sec: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionState {
    pub participant_id: String,
    pub script: InterviewScript,
    pub current_question_index: usize,
    pub elapsed_in_question: f64,
    pub transcript: InterviewTranscript,
    pub reflection_notes: Vec<Note>,
    pub checkpoint_index: usize,
    /// Whether the current block's scripted question has been spoken.
    pub asked_current: bool,
    /// Interviewer text the participant is expected to answer next.
    pub pending: Option<InterviewerAction>,
    pub finished: bool,
    pub block_timings: Vec<BlockTiming>,
}

impl SessionState {
    pub fn current_question(&self) -> Option<&ScriptQuestion> {
        self.script.questions.get(self.current_question_index)
    }

    /// Completed blocks over total blocks.
    pub fn progress(&self) -> f64 {
        self.current_question_index as f64 / self.script.len() as f64
    }
}

pub fn checkpoint(s: &SessionState, path: &Path) -> Result<(), InterviewError> {
    store_json(s, path)?;
    Ok(())
}

/// Reloads the last checkpointed state. A missing or corrupt file is an error
/// and never yields a partial state.
pub fn resume(path: &Path) -> Result<SessionState, InterviewError> {
    let s: SessionState = load_json(path)?;
    s.script.validate()?;
    if s.current_question_index > s.script.len() || s.checkpoint_index > s.current_question_index {
        return Err(CorpusError::SchemaViolation {
            field: "current_question_index".into(),
            message: "inconsistent session indices".into(),
        }
        .into());
    }
    Ok(s)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterviewerConfig {
    /// Seconds added per answered turn on top of the answer duration.
    pub turn_overhead_sec: f64,
    pub window_chars: usize,
    pub interviewer_name: String,
    pub description: String,
    pub temperature: f64,
    /// When set, the state is written to `<dir>/<participant>.session.json` at
    /// every block boundary.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub checkpoint_dir: Option<PathBuf>,
}

pub fn checkpoint_path(dir: &Path, participant_id: &str) -> PathBuf {
    dir.join(format!("{participant_id}.session.json"))
}

impl Default for InterviewerConfig {
    fn default() -> Self {
        Self {
            turn_overhead_sec: 8.0,
            window_chars: 5_000,
            interviewer_name: "Isabella".into(),
            description: "friendly and curious".into(),
            temperature: 0.0,
            checkpoint_dir: None,
        }
    }
}

/// The model's parsed move.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Decision {
    MoveOn,
    FollowUp(String),
}

/// Reads the completion marker and the utterance from an action reply. A
/// missing marker counts as "not met"; an empty utterance means move on.
pub fn parse_decision(reply: &str) -> Decision {
    let mut met = false;
    let mut utterance = None;
    for line in reply.lines() {
        let line = line.trim().trim_start_matches(['*', '-', ' ']);
        if let Some(v) = strip_prefix_ci(line, OBJECTIVE_MARKER) {
            met = v.trim().trim_matches('*').trim().to_ascii_lowercase().starts_with("yes");
        } else if let Some(v) = strip_prefix_ci(line, UTTERANCE_MARKER) {
            utterance = Some(v.trim().trim_matches('"').to_string());
        }
    }
    if utterance.is_none() {
        // fall back to the text after the "2)" heading
        if let Some(pos) = reply.find("2)") {
            let tail: String = reply[pos + 2..]
                .lines()
                .map(str::trim)
                .filter(|l| !l.is_empty() && strip_prefix_ci(l, OBJECTIVE_MARKER).is_none())
                .collect::<Vec<_>>()
                .join(" ");
            utterance = Some(tail);
        }
    }
    match utterance {
        Some(u) if !met && !u.is_empty() => Decision::FollowUp(u),
        _ => Decision::MoveOn,
    }
}

fn strip_prefix_ci<'a>(line: &'a str, prefix: &str) -> Option<&'a str> {
    let head = line.get(..prefix.len())?;
    head.eq_ignore_ascii_case(prefix).then(|| &line[prefix.len()..])
}

/// Parses reflection output into notes: quoted `"key": "value"` pairs first,
/// then `- key: value` bullets; anything else becomes one opaque note.
pub fn parse_notes(reply: &str) -> Vec<Note> {
    static PAIR: LazyLock<Regex> =
        LazyLock::new(|| Regex::new(r#""([^"\n]+)"\s*:\s*"([^"]*)""#).expect("static regex"));
    let quoted: Vec<Note> = PAIR
        .captures_iter(reply)
        .map(|c| Note { key: Some(c[1].trim().to_string()), value: c[2].trim().to_string() })
        .collect();
    if !quoted.is_empty() {
        return quoted;
    }
    let bullets: Vec<Note> = reply
        .lines()
        .map(str::trim)
        .filter_map(|l| l.strip_prefix(['-', '*', '•']))
        .map(|l| match l.split_once(':') {
            Some((k, v)) if !k.trim().is_empty() && !v.trim().is_empty() => {
                Note { key: Some(k.trim().to_string()), value: v.trim().to_string() }
            }
            _ => Note { key: None, value: l.trim().to_string() },
        })
        .collect();
    if !bullets.is_empty() {
        return bullets;
    }
    vec![Note { key: None, value: reply.trim().to_string() }]
}

pub fn render_notes(notes: &[Note]) -> String {
    if notes.is_empty() {
        return "(none yet)".into();
    }
    notes
        .iter()
        .map(|n| match &n.key {
            Some(k) => format!("- {k}: {}", n.value),
            None => format!("- {}", n.value),
        })
        .collect::<Vec<_>>()
        .join("\n")
}

/// The final `n` characters of `text`.
pub fn tail_chars(text: &str, n: usize) -> &str {
    let count = text.chars().count();
    if count <= n {
        return text;
    }
    let (idx, _) = text.char_indices().nth(count - n).expect("index within text");
    &text[idx..]
}

pub struct Interviewer<B> {
    backend: B,
    pub config: InterviewerConfig,
}

impl<B: ChatBackend> Interviewer<B> {
    pub fn new(backend: B, config: InterviewerConfig) -> Self {
        Self { backend, config }
    }

    pub fn backend(&self) -> &B {
        &self.backend
    }

    /// Starts a session at the first entry and returns the first scripted ask.
    /// The fresh state is checkpoint 0.
    pub fn begin_session(
        &self,
        script: InterviewScript,
        participant_id: &str,
    ) -> Result<(SessionState, InterviewerAction), InterviewError> {
        script.validate()?;
        let mut s = SessionState {
            participant_id: participant_id.to_string(),
            script,
            current_question_index: 0,
            elapsed_in_question: 0.0,
            transcript: InterviewTranscript::new(participant_id),
            reflection_notes: Vec::new(),
            checkpoint_index: 0,
            asked_current: false,
            pending: None,
            finished: false,
            block_timings: Vec::new(),
        };
        self.persist(&s)?;
        let action = self.next_action(&mut s)?;
        Ok((s, action))
    }

    /// The utterance the participant should answer now. Repeated calls return
    /// the same pending action without touching the transcript.
    pub fn next_action(&self, s: &mut SessionState) -> Result<InterviewerAction, InterviewError> {
        if s.finished {
            return Ok(InterviewerAction::new(ActionKind::Finish, "", s.current_question_index));
        }
        if let Some(p) = &s.pending {
            return Ok(p.clone());
        }
        let mut preamble = Vec::new();
        loop {
            let Some(q) = s.current_question().cloned() else {
                s.finished = true;
                let mut a = InterviewerAction::new(ActionKind::Finish, "", s.current_question_index);
                a.preamble = preamble;
                return Ok(a);
            };
            s.transcript.push(Speaker::Interviewer, Some(q.id.clone()), q.text.clone());
            s.asked_current = true;
            if q.is_interactive() {
                let mut a = InterviewerAction::new(ActionKind::AskScripted, q.text, s.current_question_index);
                a.preamble = preamble;
                s.pending =
                    Some(InterviewerAction::new(ActionKind::AskScripted, a.utterance.clone(), a.question_index));
                return Ok(a);
            }
            preamble.push(q.text);
            s.block_timings.push(BlockTiming { question_id: q.id, elapsed_sec: 0.0 });
            self.move_to_next(s)?;
        }
    }

    fn persist(&self, s: &SessionState) -> Result<(), InterviewError> {
        match &self.config.checkpoint_dir {
            Some(dir) => checkpoint(s, &checkpoint_path(dir, &s.participant_id)),
            None => Ok(()),
        }
    }

    fn move_to_next(&self, s: &mut SessionState) -> Result<(), InterviewError> {
        s.current_question_index += 1;
        s.elapsed_in_question = 0.0;
        s.asked_current = false;
        s.pending = None;
        s.checkpoint_index = s.current_question_index;
        if s.current_question_index >= s.script.len() {
            s.finished = true;
        }
        self.persist(s)
    }

    /// Records an answer and decides the next move: a follow-up, an advance to
    /// the next block, or finish after the last block.
    pub fn submit_answer(
        &self,
        s: &mut SessionState,
        answer_text: &str,
        answer_seconds: f64,
    ) -> Result<InterviewerAction, InterviewError> {
        if s.finished {
            return Err(InterviewError::Finished);
        }
        if !(answer_seconds >= 0.0) {
            return Err(InterviewError::InvalidArgument("answer_seconds must be >= 0".into()));
        }
        if s.pending.is_none() {
            return Err(InterviewError::InvalidArgument("no question is awaiting an answer".into()));
        }
        let q = s.current_question().cloned().expect("unfinished session has a question");
        s.transcript.push(Speaker::Participant, Some(q.id.clone()), answer_text);
        s.elapsed_in_question += answer_seconds + self.config.turn_overhead_sec;

        let decision = if s.elapsed_in_question >= q.time_limit_sec {
            Decision::MoveOn
        } else {
            let prompt = self.action_prompt(s);
            let reply = self.backend.complete(&self.request("interviewer.action", prompt))?;
            parse_decision(&reply)
        };
        match decision {
            Decision::FollowUp(text) => {
                s.transcript.push(Speaker::Interviewer, Some(q.id), text.clone());
                let a = InterviewerAction::new(ActionKind::FollowUp, text, s.current_question_index);
                s.pending = Some(a.clone());
                Ok(a)
            }
            Decision::MoveOn => {
                self.close_block(s)?;
                if s.finished {
                    Ok(InterviewerAction::new(ActionKind::Finish, "", s.current_question_index))
                } else {
                    Ok(InterviewerAction::new(ActionKind::Advance, "", s.current_question_index))
                }
            }
        }
    }

    fn close_block(&self, s: &mut SessionState) -> Result<(), InterviewError> {
        let q = s.current_question().expect("open block").clone();
        if s.transcript
            .turns
            .iter()
            .any(|t| t.speaker == Speaker::Participant && t.question_id.as_deref() == Some(q.id.as_str()))
        {
            self.refresh_reflections(s)?;
        }
        s.block_timings.push(BlockTiming { question_id: q.id, elapsed_sec: s.elapsed_in_question });
        self.move_to_next(s)?;
        if s.finished {
            return Ok(());
        }
        // closing entries with no budget are spoken immediately
        let rest = &s.script.questions[s.current_question_index..];
        if rest.iter().all(|q| !q.is_interactive()) {
            self.next_action(s)?;
        }
        Ok(())
    }

    /// Summarizes the current block and appends the parsed notes.
    pub fn refresh_reflections(&self, s: &mut SessionState) -> Result<Vec<Note>, InterviewError> {
        let qid = s.current_question().map(|q| q.id.clone());
        let block: Vec<_> =
            s.transcript.turns.iter().filter(|t| qid.is_none() || t.question_id == qid).cloned().collect();
        if !block.iter().any(|t| t.speaker == Speaker::Participant && !t.text.trim().is_empty()) {
            return Err(InterviewError::InvalidArgument("no participant answer to reflect on".into()));
        }
        let text = crate::corpus::render_turns(&block);
        let prompt = fill(REFLECTION_TEMPLATE, &[("transcript", text.trim_end())]);
        let reply = self.backend.complete(&self.request("interviewer.reflection", prompt))?;
        let notes = parse_notes(&reply);
        s.reflection_notes.extend(notes.iter().cloned());
        Ok(notes)
    }

    /// The follow-up prompt for the current block.
    pub fn action_prompt(&self, s: &SessionState) -> String {
        let q = s.current_question().expect("open block");
        let rendered = s.transcript.render();
        let window = tail_chars(&rendered, self.config.window_chars);
        let notes = render_notes(&s.reflection_notes);
        let objective = q.objective.as_deref().unwrap_or(&q.text);
        let mut prompt = fill(
            ACTION_TEMPLATE,
            &[
                ("interviewer", &self.config.interviewer_name),
                ("description", &self.config.description),
                ("notes", &notes),
                ("question", &q.text),
                ("transcript", window),
                ("objective", objective),
            ],
        );
        prompt.push_str(DECISION_SUFFIX);
        prompt
    }

    fn request(&self, tag: &str, prompt: String) -> ChatRequest {
        let mut r = ChatRequest::user(tag, prompt);
        r.temperature = self.config.temperature;
        r
    }
}
