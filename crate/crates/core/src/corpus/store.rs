use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::{CorpusError, InterviewTranscript, ParticipantTable, Phase, ResponseSet, WordCounts};

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CorpusError + '_ {
    move |source| {
        if source.kind() == std::io::ErrorKind::NotFound {
            CorpusError::NotFound(path.display().to_string())
        } else {
            CorpusError::Io { path: path.to_path_buf(), source }
        }
    }
}

fn ensure_parent(path: &Path) -> Result<(), CorpusError> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(io_err(parent))?;
    }
    Ok(())
}

fn schema_from_json(err: serde_path_to_error::Error<serde_json::Error>, prefix: &str) -> CorpusError {
    let path = err.path().to_string();
    let field = match (prefix.is_empty(), path.as_str()) {
        (true, p) => p.to_string(),
        (false, ".") => prefix.to_string(),
        (false, p) => format!("{prefix}.{p}"),
    };
    CorpusError::schema(field, err.into_inner().to_string())
}

/// Parses a JSON document, reporting the path of the first offending field.
pub fn from_json_str<T: DeserializeOwned>(text: &str) -> Result<T, CorpusError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| schema_from_json(e, ""))
}

/// Writes a single-document JSON file (pretty-printed, trailing newline).
pub fn store_json<T: Serialize>(value: &T, path: &Path) -> Result<(), CorpusError> {
    ensure_parent(path)?;
    let mut text = serde_json::to_string_pretty(value).expect("corpus types serialize");
    text.push('\n');
    fs::write(path, text).map_err(io_err(path))
}

pub fn load_json<T: DeserializeOwned>(path: &Path) -> Result<T, CorpusError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    from_json_str(&text)
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TranscriptHeader {
    participant_id: String,
    word_counts: WordCounts,
}

impl InterviewTranscript {
    /// Line-delimited layout: a header line followed by one line per turn.
    pub fn to_jsonl(&self) -> String {
        let header = TranscriptHeader { participant_id: self.participant_id.clone(), word_counts: self.word_counts };
        let mut out = serde_json::to_string(&header).expect("header serializes");
        out.push('\n');
        for t in &self.turns {
            out.push_str(&serde_json::to_string(t).expect("turn serializes"));
            out.push('\n');
        }
        out
    }

    pub fn from_jsonl(text: &str) -> Result<Self, CorpusError> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, first) = lines.next().ok_or_else(|| CorpusError::schema("line 1", "missing transcript header"))?;
        let de = &mut serde_json::Deserializer::from_str(first);
        let header: TranscriptHeader =
            serde_path_to_error::deserialize(de).map_err(|e| schema_from_json(e, "line 1"))?;
        let mut turns = Vec::new();
        for (i, line) in lines {
            let de = &mut serde_json::Deserializer::from_str(line);
            let turn =
                serde_path_to_error::deserialize(de).map_err(|e| schema_from_json(e, &format!("line {}", i + 1)))?;
            turns.push(turn);
        }
        let t = InterviewTranscript { participant_id: header.participant_id, turns, word_counts: header.word_counts };
        t.validate()?;
        Ok(t)
    }

    pub fn store(&self, path: &Path) -> Result<(), CorpusError> {
        ensure_parent(path)?;
        let file = fs::File::create(path).map_err(io_err(path))?;
        let mut w = BufWriter::new(file);
        w.write_all(self.to_jsonl().as_bytes()).map_err(io_err(path))?;
        w.flush().map_err(io_err(path))
    }

    pub fn load(path: &Path) -> Result<Self, CorpusError> {
        let file = fs::File::open(path).map_err(io_err(path))?;
        let mut text = String::new();
        for line in BufReader::new(file).lines() {
            text.push_str(&line.map_err(io_err(path))?);
            text.push('\n');
        }
        Self::from_jsonl(&text)
    }
}

/// On-disk corpus layout rooted at a directory:
/// `participants.json`, `transcripts/<id>.jsonl`, `responses/<id>.<phase>.json`,
/// and optional `personas/<id>.txt`.
#[derive(Debug, Clone)]
pub struct CorpusDir {
    root: PathBuf,
}

impl CorpusDir {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn participants_path(&self) -> PathBuf {
        self.root.join("participants.json")
    }

    pub fn transcript_path(&self, id: &str) -> PathBuf {
        self.root.join("transcripts").join(format!("{id}.jsonl"))
    }

    pub fn responses_path(&self, id: &str, phase: Phase) -> PathBuf {
        self.root.join("responses").join(format!("{id}.{}.json", phase.as_str()))
    }

    pub fn persona_path(&self, id: &str) -> PathBuf {
        self.root.join("personas").join(format!("{id}.txt"))
    }

    pub fn reflections_path(&self, id: &str) -> PathBuf {
        self.root.join("reflections").join(format!("{id}.json"))
    }

    pub fn participants(&self) -> Result<ParticipantTable, CorpusError> {
        let table: ParticipantTable = load_json(&self.participants_path())?;
        table.validate()?;
        Ok(table)
    }

    pub fn store_participants(&self, table: &ParticipantTable) -> Result<(), CorpusError> {
        table.validate()?;
        store_json(table, &self.participants_path())
    }

    pub fn transcript(&self, id: &str) -> Result<InterviewTranscript, CorpusError> {
        InterviewTranscript::load(&self.transcript_path(id))
    }

    pub fn store_transcript(&self, t: &InterviewTranscript) -> Result<(), CorpusError> {
        t.store(&self.transcript_path(&t.participant_id))
    }

    pub fn responses(&self, id: &str, phase: Phase) -> Result<ResponseSet, CorpusError> {
        load_json(&self.responses_path(id, phase))
    }

    pub fn store_responses(&self, set: &ResponseSet) -> Result<(), CorpusError> {
        store_json(set, &self.responses_path(&set.subject_id, set.phase))
    }

    pub fn persona(&self, id: &str) -> Result<String, CorpusError> {
        let path = self.persona_path(id);
        fs::read_to_string(&path).map_err(io_err(&path))
    }
}
