//! Canonical data model and persistence for participants, transcripts and
//! response sets.
//!
//! Turn streams are stored as line-delimited JSON so live interviews can be
//! appended to; every other entity is a single JSON document.

mod anonymize;
mod model;
mod store;

use std::path::PathBuf;

use thiserror::Error;

pub use anonymize::{anonymize_transcript, replace_whole_word};
pub use model::{
    render_turns, AnswerValue, DemographicSchema, DemographicValue, InterviewTranscript, ParticipantRecord,
    ParticipantTable, Phase, ResponseSet, Speaker, TranscriptTurn, WordCounts,
};
pub use store::{from_json_str, load_json, store_json, CorpusDir};

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("schema violation at `{field}`: {message}")]
    SchemaViolation { field: String, message: String },
    #[error("not found: {0}")]
    NotFound(String),
    #[error("i/o error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CorpusError {
    pub(crate) fn schema(field: impl AsRef<str>, message: impl Into<String>) -> Self {
        CorpusError::SchemaViolation { field: field.as_ref().to_string(), message: message.into() }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn arb_transcript() -> impl Strategy<Value = InterviewTranscript> {
        let turn = ("[a-zA-Z ,.'!?é]{0,40}", proptest::option::of("q[0-9]{1,2}"), any::<bool>());
        ("p[0-9]{1,3}", proptest::collection::vec(turn, 0..12)).prop_map(|(id, turns)| {
            let mut t = InterviewTranscript::new(id);
            for (i, (text, qid, follow)) in turns.into_iter().enumerate() {
                // interviewer may speak twice in a row; the participant never does
                let speaker = if i % 2 == 1 && follow { Speaker::Participant } else { Speaker::Interviewer };
                t.push(speaker, qid, text);
            }
            t
        })
    }

    proptest! {
        #[test]
        fn jsonl_round_trip(t in arb_transcript()) {
            let back = InterviewTranscript::from_jsonl(&t.to_jsonl()).unwrap();
            prop_assert_eq!(back, t);
        }

        #[test]
        fn response_set_round_trip(
            answers in proptest::collection::btree_map("[a-z]{1,6}", prop_oneof![
                (0usize..10).prop_map(AnswerValue::Option),
                (-1e6f64..1e6).prop_map(AnswerValue::Number),
                "[a-z]{1,8}".prop_map(AnswerValue::Choice),
            ], 0..10)
        ) {
            let set = ResponseSet { subject_id: "p1".into(), phase: Phase::Phase2, condition_tag: "human".into(), answers };
            let text = serde_json::to_string(&set).unwrap();
            let back: ResponseSet = from_json_str(&text).unwrap();
            prop_assert_eq!(back, set);
        }

        #[test]
        fn anonymize_is_idempotent(t in arb_transcript(), name in "[A-Za-z]{2,6}") {
            let once = anonymize_transcript(&t, &name, "P-1").unwrap();
            let twice = anonymize_transcript(&once, &name, "P-1").unwrap();
            prop_assert_eq!(once, twice);
        }
    }

    #[test]
    fn empty_transcript_round_trips_through_disk() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.jsonl");
        let t = InterviewTranscript::new("p0");
        t.store(&path).unwrap();
        assert_eq!(InterviewTranscript::load(&path).unwrap(), t);
    }

    #[test]
    fn unknown_speaker_is_schema_violation() {
        let text = "{\"participant_id\":\"p1\",\"word_counts\":{\"interviewer\":1,\"participant\":0}}\n\
                    {\"turn_index\":0,\"speaker\":\"narrator\",\"question_id\":null,\"text\":\"hi\",\"char_offset\":0}\n";
        match InterviewTranscript::from_jsonl(text) {
            Err(CorpusError::SchemaViolation { field, .. }) => assert_eq!(field, "line 2.speaker"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn bad_offset_is_schema_violation() {
        let mut t = InterviewTranscript::new("p1");
        t.push(Speaker::Interviewer, None, "hello");
        t.push(Speaker::Participant, None, "hi");
        t.turns[1].char_offset = 3;
        match InterviewTranscript::from_jsonl(&t.to_jsonl()) {
            Err(CorpusError::SchemaViolation { field, .. }) => assert_eq!(field, "turns[1].char_offset"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn participants_validate_against_schema() {
        let mut table = ParticipantTable::default();
        table.schema.insert("gender".into(), vec!["female".into(), "male".into()]);
        table.participants.push(ParticipantRecord {
            participant_id: "p1".into(),
            pseudonym: "A".into(),
            demographics: [("gender".to_string(), DemographicValue::One("male".into()))].into(),
            withdrawn: false,
        });
        table.validate().unwrap();
        table.participants.push(table.participants[0].clone());
        assert!(table.validate().is_err());
        table.participants.pop();
        table.participants[0].demographics.insert("gender".into(), DemographicValue::One("other".into()));
        match table.validate() {
            Err(CorpusError::SchemaViolation { field, .. }) => {
                assert_eq!(field, "participants[0].demographics.gender")
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn missing_file_is_not_found() {
        let dir = tempfile::tempdir().unwrap();
        let corpus = CorpusDir::new(dir.path());
        assert!(matches!(corpus.transcript("nobody"), Err(CorpusError::NotFound(_))));
    }
}
