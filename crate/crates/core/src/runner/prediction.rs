use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::plan::{scored_batteries, Backends, StudyPlan};
use super::{build_agent, fmt_opt, thread_pool, Population, RunnerError, Subject};
use crate::agent::{AgentEngine, AgentError, AgentMemory, EngineConfig, PredictionTrace, Variant};
use crate::battery::Battery;
use crate::corpus::{CorpusDir, Phase, ResponseSet};
use crate::llm::ChatBackend;
use crate::metrics::{construct_level, subject_rows, FidelityReport, SubjectResponses};

/// Item counts for one subject under one condition.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Accounting {
    pub subject_id: String,
    pub condition: String,
    pub battery_size: usize,
    pub predicted: usize,
    pub parse_failed: usize,
    /// Items the subject left unanswered in phase 1.
    pub skipped: usize,
}

impl Accounting {
    pub fn balanced(&self) -> bool {
        self.predicted + self.parse_failed + self.skipped == self.battery_size
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParseFailure {
    pub subject_id: String,
    pub condition: String,
    pub item_id: String,
    pub raw_output: String,
    pub attempts: u32,
}

/// One agent's predictions over the scored batteries.
#[derive(Debug, Clone)]
pub struct SubjectRun {
    pub predicted: ResponseSet,
    pub traces: Vec<PredictionTrace>,
    pub accounting: Accounting,
    pub failures: Vec<ParseFailure>,
}

/// Predicts every item the subject answered in phase 1. Parse failures are
/// recorded and leave the item out; backend errors abort.
pub fn predict_subject<B: ChatBackend + ?Sized>(
    subject: &Subject,
    memory: &AgentMemory,
    batteries: &[&Battery],
    backend: &B,
    config: &EngineConfig,
    condition: &str,
) -> Result<SubjectRun, RunnerError> {
    let engine = AgentEngine::new(backend, config.clone());
    let mut predicted = ResponseSet::new(subject.id(), Phase::Prediction, condition);
    let mut traces = Vec::new();
    let mut failures = Vec::new();
    let mut accounting = Accounting {
        subject_id: subject.id().to_string(),
        condition: condition.to_string(),
        battery_size: 0,
        predicted: 0,
        parse_failed: 0,
        skipped: 0,
    };
    for battery in batteries {
        for item in &battery.items {
            accounting.battery_size += 1;
            if subject.phase1.get(&item.item_id).is_none() {
                accounting.skipped += 1;
                continue;
            }
            match engine.predict(memory, item, battery) {
                Ok((answer, mut trace)) => {
                    trace.condition = Some(condition.to_string());
                    predicted.answers.insert(item.item_id.clone(), answer);
                    traces.push(trace);
                    accounting.predicted += 1;
                }
                Err(AgentError::Parse { raw, attempts }) => {
                    tracing::warn!(subject = subject.id(), item = %item.item_id, attempts, "prediction did not parse");
                    failures.push(ParseFailure {
                        subject_id: subject.id().to_string(),
                        condition: condition.to_string(),
                        item_id: item.item_id.clone(),
                        raw_output: raw,
                        attempts,
                    });
                    accounting.parse_failed += 1;
                }
                Err(e) => return Err(e.into()),
            }
        }
    }
    Ok(SubjectRun { predicted, traces, accounting, failures })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionReport {
    pub seed: u64,
    pub conditions: Vec<Variant>,
    pub subjects: usize,
    pub withdrawn_excluded: usize,
    pub fidelity: FidelityReport,
    pub accounting: Vec<Accounting>,
    pub parse_failures: Vec<ParseFailure>,
}

impl PredictionReport {
    pub fn total_parse_failures(&self) -> usize {
        self.parse_failures.len()
    }

    pub fn to_markdown(&self) -> String {
        let mut s = format!(
            "# Prediction study\n\nseed {}, {} subject(s), {} withdrawn excluded, {} parse failure(s)\n\n",
            self.seed,
            self.subjects,
            self.withdrawn_excluded,
            self.parse_failures.len()
        );
        s.push_str("| construct | condition | metric | n | value | std | normalized | normalized std | correlation | normalized correlation |\n");
        s.push_str("|---|---|---|---|---|---|---|---|---|---|\n");
        for a in &self.fidelity.individual {
            s.push_str(&format!(
                "| {} | {} | {} | {} | {} | {} | {} | {} | {} | {} |\n",
                a.construct.as_str(),
                a.condition,
                a.metric,
                a.n_rows,
                fmt_opt(a.raw_mean),
                fmt_opt(a.raw_std),
                fmt_opt(a.normalized_mean),
                fmt_opt(a.normalized_std),
                fmt_opt(a.correlation),
                fmt_opt(a.normalized_correlation_mean),
            ));
        }
        s
    }
}

pub type ConditionRuns = Vec<(Variant, SubjectRun)>;

fn run_subject(
    subject: &Subject,
    plan: &StudyPlan,
    batteries: &[Battery],
    backends: &Backends,
) -> Result<ConditionRuns, RunnerError> {
    let backend = backends.for_subject(subject);
    let scored = scored_batteries(batteries);
    let config = plan.engine_config();
    plan.conditions
        .iter()
        .map(|&variant| {
            let memory = build_agent(subject, variant, batteries, &*backend, plan.seed)?;
            let run = predict_subject(subject, &memory, &scored, &*backend, &config, &variant.to_string())?;
            Ok((variant, run))
        })
        .collect()
}

/// Predictions for every active subject under every plan condition, before
/// any scoring.
#[derive(Debug, Clone)]
pub struct PopulationRuns {
    pub population: Population,
    pub batteries: Vec<Battery>,
    /// Per subject, in population order; per condition, in plan order.
    pub runs: Vec<ConditionRuns>,
}

impl PopulationRuns {
    /// Predicted response sets for one condition, in subject order.
    pub fn predictions(&self, variant: Variant) -> Vec<&ResponseSet> {
        self.runs.iter().flatten().filter(|(v, _)| *v == variant).map(|(_, r)| &r.predicted).collect()
    }

    pub fn traces(&self) -> Vec<PredictionTrace> {
        self.runs.iter().flatten().flat_map(|(_, r)| r.traces.iter().cloned()).collect()
    }
}

pub fn predict_population(plan: &StudyPlan) -> Result<PopulationRuns, RunnerError> {
    plan.validate()?;
    let batteries = plan.load_batteries()?;
    let population = Population::load(&CorpusDir::new(&plan.corpus))?;
    let backends = Backends::build(&plan.backend, &batteries, plan.seed)?;
    let threads = if backends.order_sensitive() { 1 } else { plan.parallelism };
    let runs: Vec<ConditionRuns> = thread_pool(threads)?.install(|| {
        population.subjects.par_iter().map(|s| run_subject(s, plan, &batteries, &backends)).collect::<Result<_, _>>()
    })?;
    Ok(PopulationRuns { population, batteries, runs })
}

/// Runs every condition for every active subject and scores the predictions
/// against phase 1, with phase 2 as the consistency baseline.
pub fn run_prediction_study(plan: &StudyPlan) -> Result<(PredictionReport, Vec<PredictionTrace>), RunnerError> {
    plan.validate()?;
    let population = Population::load(&CorpusDir::new(&plan.corpus))?;
    if let Some(s) = population.subjects.iter().find(|s| s.phase2.is_none()) {
        return Err(RunnerError::invalid(format!("subject `{}` has no phase-2 responses", s.id())));
    }
    let PopulationRuns { population, batteries, runs } = predict_population(plan)?;

    let mut rows = Vec::new();
    let mut construct = Vec::new();
    let mut accounting = Vec::new();
    let mut parse_failures = Vec::new();
    let mut traces = Vec::new();
    for (ci, variant) in plan.conditions.iter().enumerate() {
        let condition = variant.to_string();
        let mut responses = Vec::new();
        for (subject, subject_runs) in population.subjects.iter().zip(&runs) {
            let run = &subject_runs[ci].1;
            responses.push(SubjectResponses {
                subject_id: subject.id().to_string(),
                phase1: subject.phase1.clone(),
                phase2: subject.phase2.clone().expect("checked above"),
                predicted: run.predicted.clone(),
            });
            accounting.push(run.accounting.clone());
            parse_failures.extend(run.failures.iter().cloned());
            traces.extend(run.traces.iter().cloned());
        }
        for r in &responses {
            rows.extend(subject_rows(r, &batteries, &condition)?);
        }
        construct.extend(construct_level(&responses, &batteries, &condition)?);
    }
    if !parse_failures.is_empty() {
        tracing::warn!(total = parse_failures.len(), "predictions excluded after parse failures");
    }
    let report = PredictionReport {
        seed: plan.seed,
        conditions: plan.conditions.clone(),
        subjects: population.subjects.len(),
        withdrawn_excluded: population.withdrawn,
        fidelity: FidelityReport::new(rows, construct),
        accounting,
        parse_failures,
    };
    Ok((report, traces))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::llm::{FnBackend, LlmError};
    use crate::metrics::Construct;
    use crate::runner::{BackendSpec, StudyReport};

    fn plan(backend: BackendSpec, conditions: &[&str]) -> StudyPlan {
        StudyPlan {
            corpus: concat!(env!("CARGO_MANIFEST_DIR"), "/../../fixtures/corpus").into(),
            batteries: vec![
                "bundled:gss".into(),
                "bundled:bfi44".into(),
                "bundled:games".into(),
                "bundled:experiments".into(),
            ],
            conditions: conditions.iter().map(|c| c.parse().unwrap()).collect(),
            seed: 7,
            backend,
            output_dir: "out".into(),
            parallelism: 3,
            engine: None,
            alpha: 0.05,
            bias_attributes: vec![],
        }
    }

    #[test]
    fn echo_gives_inverse_consistency() {
        let (report, traces) = run_prediction_study(&plan(BackendSpec::Echo, &["interview", "composite"])).unwrap();
        assert!(report.parse_failures.is_empty());
        assert!(report.accounting.iter().all(Accounting::balanced));
        assert_eq!(report.accounting[0].battery_size, 30 + 44 + 5);
        assert_eq!(traces.len(), 2 * 5 * 79);
        for row in report.fidelity.rows.iter().filter(|r| r.construct == Construct::GssCat) {
            assert_eq!(row.raw, Some(1.0));
            let c = row.consistency.unwrap();
            assert!((row.normalized.unwrap() - 1.0 / c).abs() < 1e-12, "{row:?}");
        }
        assert!(report.fidelity.individual.iter().all(|a| a.accounting_holds()));
    }

    #[test]
    fn parse_failures_are_excluded_and_counted() {
        let p = plan(BackendSpec::Echo, &["persona"]);
        let batteries = p.load_batteries().unwrap();
        let population = Population::load(&CorpusDir::new(&p.corpus)).unwrap();
        let s = &population.subjects[0];
        let backend = FnBackend::new(|req| {
            if req.tag == "predict:age" {
                Ok("I cannot say.".into())
            } else if req.tag.starts_with("predict:") {
                Ok("Response: 1".into())
            } else {
                Err(LlmError::InvalidRequest("unexpected".into()))
            }
        });
        let memory = build_agent(s, Variant::Persona, &batteries, &backend, 7).unwrap();
        let run =
            predict_subject(s, &memory, &scored_batteries(&batteries), &backend, &EngineConfig::default(), "persona")
                .unwrap();
        assert_eq!(run.accounting.parse_failed, 1);
        assert_eq!(run.failures[0].item_id, "age");
        assert_eq!(run.failures[0].attempts, 3);
        assert!(run.accounting.balanced());
        assert!(run.predicted.get("age").is_none());
    }

    #[test]
    fn reports_are_byte_identical_across_runs_and_thread_counts() {
        let mut p = plan(BackendSpec::Uniform, &["demographic"]);
        let a = run_prediction_study(&p).unwrap();
        p.parallelism = 1;
        let b = run_prediction_study(&p).unwrap();
        let (ja, jb) = (StudyReport::Prediction(a.0).to_json(), StudyReport::Prediction(b.0).to_json());
        assert_eq!(ja, jb);
        assert_eq!(a.1, b.1);
    }
}
