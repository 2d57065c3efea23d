//! End-to-end studies over a corpus: prediction fidelity, experiment
//! replication and demographic bias.

mod bias;
pub mod oracle;
mod plan;
mod prediction;
mod replication;

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::agent::{
    build_demographic_material, generate_expert_reflections, lesion_transcript, summarize_material, AgentError,
    AgentMemory, Composite, ConditioningMaterial, Demographics, Expert, PredictionTrace, Variant,
};
use crate::battery::{Battery, BatteryError, Instrument};
use crate::corpus::{
    load_json, CorpusDir, CorpusError, InterviewTranscript, ParticipantRecord, ParticipantTable, Phase, ResponseSet,
};
use crate::llm::{ChatBackend, LlmError};
use crate::metrics::MetricsError;
use crate::stats::StatsError;

pub use bias::{bias_from_rows, run_bias_study, FairnessReport, FairnessRow, GroupScore};
pub use plan::{load_battery, scored_batteries, BackendSpec, Backends, StudyPlan};
pub use prediction::{
    predict_population, predict_subject, run_prediction_study, Accounting, ConditionRuns, ParseFailure, PopulationRuns,
    PredictionReport, SubjectRun,
};
pub use replication::{
    analyze_experiment, build_replication_report, effect_size_correlation, human_outcomes, replicate_agents,
    run_replication_study, AgentReplication, ArmResult, Direction, EffectSizeCorrelation, ExperimentOutcome,
    ReplicationReport, StudyReplication,
};

#[derive(Debug, Error)]
pub enum RunnerError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Battery(#[from] BatteryError),
    #[error(transparent)]
    Agent(#[from] AgentError),
    #[error(transparent)]
    Backend(#[from] LlmError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

impl RunnerError {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        RunnerError::InvalidArgument(msg.into())
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> RunnerError + '_ {
    move |source| RunnerError::Io { path: path.to_path_buf(), source }
}

/// Everything the corpus holds about one participant.
#[derive(Debug, Clone)]
pub struct Subject {
    pub record: ParticipantRecord,
    pub transcript: Option<InterviewTranscript>,
    pub persona: Option<String>,
    pub reflections: Option<BTreeMap<Expert, Vec<String>>>,
    pub phase1: ResponseSet,
    pub phase2: Option<ResponseSet>,
}

impl Subject {
    pub fn id(&self) -> &str {
        &self.record.participant_id
    }

    fn transcript(&self) -> Result<&InterviewTranscript, RunnerError> {
        self.transcript
            .as_ref()
            .ok_or_else(|| RunnerError::invalid(format!("subject `{}` has no transcript", self.id())))
    }
}

/// Active participants in id order, plus the withdrawn count.
#[derive(Debug, Clone)]
pub struct Population {
    pub table: ParticipantTable,
    pub subjects: Vec<Subject>,
    pub withdrawn: usize,
}

fn optional<T>(r: Result<T, CorpusError>) -> Result<Option<T>, CorpusError> {
    match r {
        Ok(v) => Ok(Some(v)),
        Err(CorpusError::Io { source, .. }) if source.kind() == std::io::ErrorKind::NotFound => Ok(None),
        Err(e) => Err(e),
    }
}

impl Population {
    pub fn load(dir: &CorpusDir) -> Result<Self, RunnerError> {
        let table = dir.participants()?;
        let mut subjects = Vec::new();
        let mut withdrawn = 0;
        for record in &table.participants {
            if record.withdrawn {
                withdrawn += 1;
                continue;
            }
            let id = record.participant_id.as_str();
            let reflections =
                if dir.reflections_path(id).exists() { Some(load_json(&dir.reflections_path(id))?) } else { None };
            subjects.push(Subject {
                record: record.clone(),
                transcript: optional(dir.transcript(id))?,
                persona: optional(dir.persona(id))?,
                reflections,
                phase1: dir.responses(id, Phase::Phase1)?,
                phase2: optional(dir.responses(id, Phase::Phase2))?,
            });
        }
        subjects.sort_by(|a, b| a.id().cmp(b.id()));
        Ok(Self { table, subjects, withdrawn })
    }
}

/// Per-subject seed derived from the plan seed.
pub fn subject_seed(seed: u64, purpose: &str, subject_id: &str) -> u64 {
    let digest = Sha256::digest(format!("{seed}:{purpose}:{subject_id}").as_bytes());
    u64::from_be_bytes(digest[..8].try_into().expect("digest has 32 bytes"))
}

fn composite_for(subject: &Subject, batteries: &[Battery]) -> Composite {
    let scored: Vec<&Battery> = batteries.iter().filter(|b| b.instrument != Instrument::Experiments).collect();
    Composite::from_responses(&[&subject.phase1], &scored)
}

fn reflections_for<B: ChatBackend + ?Sized>(
    subject: &Subject,
    backend: &B,
) -> Result<BTreeMap<Expert, Vec<String>>, RunnerError> {
    match &subject.reflections {
        Some(r) => Ok(r.clone()),
        None => Ok(generate_expert_reflections(subject.transcript()?, &backend)?),
    }
}

/// Builds the agent for `subject` under one conditioning variant.
pub fn build_agent<B: ChatBackend + ?Sized>(
    subject: &Subject,
    variant: Variant,
    batteries: &[Battery],
    backend: &B,
    seed: u64,
) -> Result<AgentMemory, RunnerError> {
    let id = subject.id().to_string();
    let provenance = vec![id.clone()];
    let mut memory = match variant {
        Variant::Interview | Variant::Maximal => {
            let m = ConditioningMaterial::new(variant, subject.transcript()?.render(), provenance)?;
            let mut memory = AgentMemory::new(&id, m);
            memory.reflections = reflections_for(subject, backend)?;
            if variant == Variant::Maximal {
                memory.composite = Some(composite_for(subject, batteries));
            }
            memory
        }
        Variant::Demographic => {
            let gss = batteries
                .iter()
                .find(|b| b.instrument == Instrument::Gss)
                .ok_or_else(|| RunnerError::invalid("demographic agents need the GSS battery"))?;
            let mut m = build_demographic_material(&Demographics::from_gss(&subject.phase1, gss)?)?;
            m.provenance = provenance;
            AgentMemory::new(&id, m)
        }
        Variant::Persona => {
            let text = subject
                .persona
                .as_ref()
                .ok_or_else(|| RunnerError::invalid(format!("subject `{id}` has no persona")))?;
            AgentMemory::new(&id, ConditioningMaterial::new(variant, text.trim(), provenance)?)
        }
        Variant::Composite => {
            let mut memory = AgentMemory::new(&id, ConditioningMaterial::new(variant, "", provenance)?);
            memory.composite = Some(composite_for(subject, batteries));
            memory
        }
        Variant::Summary => AgentMemory::new(&id, summarize_material(subject.transcript()?, &backend)?),
        Variant::Lesioned(_) => {
            let fraction = variant.lesion_fraction().expect("lesioned variant");
            let m = lesion_transcript(subject.transcript()?, fraction, subject_seed(seed, "lesion", &id))?;
            AgentMemory::new(&id, m)
        }
    };
    memory.agent_id = id;
    Ok(memory)
}

/// A report file as written under `out/<study>/report.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StudyReport {
    Prediction(PredictionReport),
    Replication(ReplicationReport),
    Bias(FairnessReport),
}

impl StudyReport {
    pub fn study_name(&self) -> &'static str {
        match self {
            StudyReport::Prediction(_) => "prediction",
            StudyReport::Replication(_) => "replication",
            StudyReport::Bias(_) => "bias",
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn to_csv(&self) -> String {
        match self {
            StudyReport::Prediction(r) => r.fidelity.to_csv(),
            StudyReport::Replication(r) => r.to_csv(),
            StudyReport::Bias(r) => r.to_csv(),
        }
    }

    pub fn to_markdown(&self) -> String {
        match self {
            StudyReport::Prediction(r) => r.to_markdown(),
            StudyReport::Replication(r) => r.to_markdown(),
            StudyReport::Bias(r) => r.to_markdown(),
        }
    }

    pub fn load(path: &Path) -> Result<Self, RunnerError> {
        Ok(load_json(path)?)
    }

    /// Writes `report.json`, `report.csv` and `trace.jsonl` under `dir/<study>/`.
    pub fn write(&self, dir: &Path, traces: &[PredictionTrace]) -> Result<PathBuf, RunnerError> {
        let out = dir.join(self.study_name());
        fs::create_dir_all(&out).map_err(io_err(&out))?;
        let write = |name: &str, body: &[u8]| -> Result<(), RunnerError> {
            let path = out.join(name);
            fs::write(&path, body).map_err(io_err(&path))
        };
        write("report.json", self.to_json().as_bytes())?;
        write("report.csv", self.to_csv().as_bytes())?;
        let mut buf = Vec::new();
        for t in traces {
            serde_json::to_writer(&mut buf, t).expect("trace serializes");
            buf.write_all(b"\n").expect("write to vec");
        }
        write("trace.jsonl", &buf)?;
        Ok(out)
    }
}

pub(crate) fn fmt_opt(x: Option<f64>) -> String {
    x.map(|v| format!("{v:.4}")).unwrap_or_else(|| "n/a".into())
}

pub(crate) fn thread_pool(parallelism: usize) -> Result<rayon::ThreadPool, RunnerError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(parallelism)
        .build()
        .map_err(|e| RunnerError::invalid(format!("thread pool: {e}")))
}
