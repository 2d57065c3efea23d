use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::CorpusError;

/// A demographic attribute value. Most attributes are single-valued; ethnicity
/// allows several selections.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DemographicValue {
    One(String),
    Many(Vec<String>),
}

impl DemographicValue {
    pub fn labels(&self) -> Vec<&str> {
        match self {
            DemographicValue::One(s) => vec![s.as_str()],
            DemographicValue::Many(v) => v.iter().map(String::as_str).collect(),
        }
    }
}

/// Declared category sets, attribute name to allowed labels in display order.
/// The first label of each attribute is the regression reference group.
pub type DemographicSchema = BTreeMap<String, Vec<String>>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParticipantRecord {
    pub participant_id: String,
    pub pseudonym: String,
    #[serde(default)]
    pub demographics: BTreeMap<String, DemographicValue>,
    /// Set when the participant has withdrawn consent.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub withdrawn: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct ParticipantTable {
    pub schema: DemographicSchema,
    pub participants: Vec<ParticipantRecord>,
}

impl ParticipantTable {
    pub fn validate(&self) -> Result<(), CorpusError> {
        let mut seen = BTreeSet::new();
        for (i, p) in self.participants.iter().enumerate() {
            if !seen.insert(p.participant_id.as_str()) {
                return Err(CorpusError::schema(
                    format!("participants[{i}].participant_id"),
                    format!("duplicate participant id `{}`", p.participant_id),
                ));
            }
            for (attr, value) in &p.demographics {
                let field = format!("participants[{i}].demographics.{attr}");
                let allowed = self
                    .schema
                    .get(attr)
                    .ok_or_else(|| CorpusError::schema(&field, "attribute not declared in schema"))?;
                for label in value.labels() {
                    if !allowed.iter().any(|a| a == label) {
                        return Err(CorpusError::schema(&field, format!("`{label}` is not a declared category")));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn get(&self, id: &str) -> Option<&ParticipantRecord> {
        self.participants.iter().find(|p| p.participant_id == id)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Speaker {
    Interviewer,
    Participant,
}

impl Speaker {
    pub fn label(self) -> &'static str {
        match self {
            Speaker::Interviewer => "Interviewer",
            Speaker::Participant => "Interviewee",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TranscriptTurn {
    pub turn_index: u32,
    pub speaker: Speaker,
    pub question_id: Option<String>,
    pub text: String,
    pub char_offset: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct WordCounts {
    pub interviewer: usize,
    pub participant: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InterviewTranscript {
    pub participant_id: String,
    pub turns: Vec<TranscriptTurn>,
    pub word_counts: WordCounts,
}

impl InterviewTranscript {
    pub fn new(participant_id: impl Into<String>) -> Self {
        Self { participant_id: participant_id.into(), turns: Vec::new(), word_counts: WordCounts::default() }
    }

    /// Appends a turn, assigning its index and offset.
    pub fn push(&mut self, speaker: Speaker, question_id: Option<String>, text: impl Into<String>) {
        let text = text.into();
        let char_offset = self.turns.last().map(|t| t.char_offset + t.text.chars().count()).unwrap_or(0);
        let words = text.split_whitespace().count();
        match speaker {
            Speaker::Interviewer => self.word_counts.interviewer += words,
            Speaker::Participant => self.word_counts.participant += words,
        }
        self.turns.push(TranscriptTurn {
            turn_index: self.turns.len() as u32,
            speaker,
            question_id,
            text,
            char_offset,
        });
    }

    pub fn is_empty(&self) -> bool {
        self.turns.is_empty()
    }

    pub fn participant_turns(&self) -> impl Iterator<Item = &TranscriptTurn> {
        self.turns.iter().filter(|t| t.speaker == Speaker::Participant)
    }

    pub fn compute_word_counts(&self) -> WordCounts {
        let mut wc = WordCounts::default();
        for t in &self.turns {
            let n = t.text.split_whitespace().count();
            match t.speaker {
                Speaker::Interviewer => wc.interviewer += n,
                Speaker::Participant => wc.participant += n,
            }
        }
        wc
    }

    /// Recomputes indices, offsets and word counts from the turn texts.
    pub fn reindex(&mut self) {
        let mut offset = 0;
        for (i, t) in self.turns.iter_mut().enumerate() {
            t.turn_index = i as u32;
            t.char_offset = offset;
            offset += t.text.chars().count();
        }
        self.word_counts = self.compute_word_counts();
    }

    /// Plain-text rendering used as conditioning material and prompt context.
    pub fn render(&self) -> String {
        render_turns(&self.turns)
    }

    /// Question/response pairs: each group starts where the question id changes.
    pub fn question_blocks(&self) -> Vec<&[TranscriptTurn]> {
        let mut blocks = Vec::new();
        let mut start = 0;
        for i in 1..self.turns.len() {
            if self.turns[i].question_id.is_some() && self.turns[i].question_id != self.turns[i - 1].question_id {
                blocks.push(&self.turns[start..i]);
                start = i;
            }
        }
        if start < self.turns.len() {
            blocks.push(&self.turns[start..]);
        }
        blocks
    }

    /// Checks the structural invariants, naming the first offending field.
    ///
    /// Consecutive interviewer turns are allowed (a non-interactive preamble is
    /// followed directly by the next scripted question); a participant turn must
    /// always answer an interviewer turn.
    pub fn validate(&self) -> Result<(), CorpusError> {
        let mut offset = 0;
        for (i, t) in self.turns.iter().enumerate() {
            if t.turn_index as usize != i {
                return Err(CorpusError::schema(
                    format!("turns[{i}].turn_index"),
                    format!("expected {i}, found {}", t.turn_index),
                ));
            }
            if t.char_offset != offset {
                return Err(CorpusError::schema(
                    format!("turns[{i}].char_offset"),
                    format!("expected {offset}, found {}", t.char_offset),
                ));
            }
            let prev = if i == 0 { None } else { Some(self.turns[i - 1].speaker) };
            if t.speaker == Speaker::Participant && prev != Some(Speaker::Interviewer) {
                return Err(CorpusError::schema(
                    format!("turns[{i}].speaker"),
                    "participant turn must follow an interviewer turn",
                ));
            }
            offset += t.text.chars().count();
        }
        if self.word_counts != self.compute_word_counts() {
            return Err(CorpusError::schema("word_counts", "does not match the turn texts"));
        }
        Ok(())
    }
}

pub fn render_turns(turns: &[TranscriptTurn]) -> String {
    let mut out = String::new();
    for t in turns {
        out.push_str(t.speaker.label());
        out.push_str(": ");
        out.push_str(&t.text);
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Phase1,
    Phase2,
    Prediction,
}

impl Phase {
    pub fn as_str(self) -> &'static str {
        match self {
            Phase::Phase1 => "phase1",
            Phase::Phase2 => "phase2",
            Phase::Prediction => "prediction",
        }
    }
}

/// A single recorded answer: an option index, a number, or a choice token.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnswerValue {
    Option(usize),
    Number(f64),
    Choice(String),
}

impl AnswerValue {
    pub fn as_option(&self) -> Option<usize> {
        match self {
            AnswerValue::Option(i) => Some(*i),
            _ => None,
        }
    }

    pub fn as_number(&self) -> Option<f64> {
        match self {
            AnswerValue::Number(x) => Some(*x),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResponseSet {
    pub subject_id: String,
    pub phase: Phase,
    /// `human` for participant answers, otherwise the conditioning variant tag.
    pub condition_tag: String,
    pub answers: BTreeMap<String, AnswerValue>,
}

impl ResponseSet {
    pub fn new(subject_id: impl Into<String>, phase: Phase, condition_tag: impl Into<String>) -> Self {
        Self { subject_id: subject_id.into(), phase, condition_tag: condition_tag.into(), answers: BTreeMap::new() }
    }

    pub fn get(&self, item_id: &str) -> Option<&AnswerValue> {
        self.answers.get(item_id)
    }
}
