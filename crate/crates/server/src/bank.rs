//! Read-only agent answers and the query math over them.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use agentbank::agent::{query_for, PredictionTrace, Query};
use agentbank::battery::Battery;
use agentbank::corpus::{AnswerValue, DemographicValue, ParticipantTable};
use serde::{Deserialize, Serialize};

use crate::ServerError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    Categorical,
    Numeric,
}

/// A fixed task: one battery item.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Task {
    pub task_id: String,
    pub battery: String,
    pub question: String,
    pub kind: TaskKind,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub options: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub range: Option<(f64, f64)>,
}

impl Task {
    fn label(&self, v: &AnswerValue) -> Option<String> {
        match v {
            AnswerValue::Option(i) => self.options.get(*i).cloned(),
            AnswerValue::Choice(c) => self.options.iter().find(|o| o.eq_ignore_ascii_case(c)).cloned(),
            AnswerValue::Number(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BankAgent {
    pub agent_id: String,
    pub demographics: BTreeMap<String, DemographicValue>,
    pub answers: BTreeMap<String, AnswerValue>,
}

/// Attribute → accepted labels. An agent matches when every attribute shares
/// at least one label with it.
pub type Filter = BTreeMap<String, Vec<String>>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptionCount {
    pub label: String,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AggregateValue {
    Categorical {
        counts: Vec<OptionCount>,
    },
    /// `std` uses n − 1 and is 0 for a single agent.
    Numeric {
        mean: f64,
        std: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateResult {
    pub task_id: String,
    pub n: usize,
    #[serde(flatten)]
    pub value: AggregateValue,
}

impl AggregateResult {
    pub fn rows(&self) -> usize {
        match &self.value {
            AggregateValue::Categorical { counts } => counts.len(),
            AggregateValue::Numeric { .. } => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum QueryError {
    #[error("unknown task `{0}`")]
    UnknownTask(String),
    #[error("unknown agent `{0}`")]
    UnknownAgent(String),
    #[error("unknown demographic attribute `{0}`")]
    UnknownAttribute(String),
    #[error("{matching} matching agent(s) is below the threshold of {k_min}")]
    BelowKMin { matching: usize, k_min: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentAnswer {
    pub agent_id: String,
    pub answer: Option<AnswerValue>,
}

#[derive(Debug, Clone, Default)]
pub struct AgentBank {
    pub tasks: Vec<Task>,
    pub agents: Vec<BankAgent>,
    pub withdrawn: BTreeSet<String>,
    attributes: BTreeSet<String>,
}

impl AgentBank {
    /// Builds the bank from the participant table and each agent's predicted
    /// answers. Withdrawn participants keep no answers.
    pub fn new(
        table: &ParticipantTable,
        answers: BTreeMap<String, BTreeMap<String, AnswerValue>>,
        batteries: &[Battery],
        extra_withdrawn: &BTreeSet<String>,
    ) -> Result<Self, ServerError> {
        let mut tasks = Vec::new();
        for b in batteries {
            for item in &b.items {
                let task = match query_for(item, b).map_err(|e| ServerError::Config(e.to_string()))? {
                    Query::Categorical { question, options } => Task {
                        task_id: item.item_id.clone(),
                        battery: b.battery_id.clone(),
                        question,
                        kind: TaskKind::Categorical,
                        options,
                        range: None,
                    },
                    Query::Numeric { question, min, max } => Task {
                        task_id: item.item_id.clone(),
                        battery: b.battery_id.clone(),
                        question,
                        kind: TaskKind::Numeric,
                        options: vec![],
                        range: Some((min, max)),
                    },
                };
                tasks.push(task);
            }
        }
        let mut withdrawn = extra_withdrawn.clone();
        let mut agents = Vec::new();
        for p in &table.participants {
            if p.withdrawn || withdrawn.contains(&p.participant_id) {
                withdrawn.insert(p.participant_id.clone());
                continue;
            }
            agents.push(BankAgent {
                agent_id: p.participant_id.clone(),
                demographics: p.demographics.clone(),
                answers: answers.get(&p.participant_id).cloned().unwrap_or_default(),
            });
        }
        agents.sort_by(|a, b| a.agent_id.cmp(&b.agent_id));
        let attributes = table.schema.keys().cloned().collect();
        Ok(Self { tasks, agents, withdrawn, attributes })
    }

    pub fn task(&self, task_id: &str) -> Result<&Task, QueryError> {
        self.tasks.iter().find(|t| t.task_id == task_id).ok_or_else(|| QueryError::UnknownTask(task_id.into()))
    }

    fn matches(&self, agent: &BankAgent, filter: &Filter) -> bool {
        filter.iter().all(|(attr, wanted)| {
            agent.demographics.get(attr).is_some_and(|v| v.labels().iter().any(|l| wanted.iter().any(|w| w == l)))
        })
    }

    /// Counts per option or mean and spread over matching agents that have an
    /// answer. Nothing is computed below `k_min`.
    pub fn aggregate(&self, task_id: &str, filter: &Filter, k_min: usize) -> Result<AggregateResult, QueryError> {
        let task = self.task(task_id)?;
        if let Some(a) = filter.keys().find(|a| !self.attributes.contains(*a)) {
            return Err(QueryError::UnknownAttribute(a.clone()));
        }
        let values: Vec<&AnswerValue> =
            self.agents.iter().filter(|a| self.matches(a, filter)).filter_map(|a| a.answers.get(task_id)).collect();
        if values.len() < k_min {
            return Err(QueryError::BelowKMin { matching: values.len(), k_min });
        }
        let n = values.len();
        let value = match task.kind {
            TaskKind::Categorical => {
                let mut counts: Vec<OptionCount> =
                    task.options.iter().map(|o| OptionCount { label: o.clone(), count: 0 }).collect();
                for v in &values {
                    if let Some(l) = task.label(v) {
                        counts.iter_mut().find(|c| c.label == l).expect("label from options").count += 1;
                    }
                }
                AggregateValue::Categorical { counts }
            }
            TaskKind::Numeric => {
                let xs: Vec<f64> = values.iter().filter_map(|v| v.as_number()).collect();
                let mean = xs.iter().sum::<f64>() / xs.len() as f64;
                let std = if xs.len() > 1 {
                    (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
                } else {
                    0.0
                };
                AggregateValue::Numeric { mean, std }
            }
        };
        Ok(AggregateResult { task_id: task_id.into(), n, value })
    }

    /// Selected agents, or all of them when `selector` is `None`. Withdrawn ids
    /// are dropped and counted.
    pub fn select(&self, selector: Option<&[String]>) -> Result<(Vec<&BankAgent>, usize), QueryError> {
        let Some(ids) = selector else { return Ok((self.agents.iter().collect(), 0)) };
        let mut out = Vec::new();
        let mut excluded = 0;
        let mut seen = BTreeSet::new();
        for id in ids {
            if !seen.insert(id) {
                continue;
            }
            if self.withdrawn.contains(id) {
                excluded += 1;
                continue;
            }
            out.push(
                self.agents.iter().find(|a| &a.agent_id == id).ok_or_else(|| QueryError::UnknownAgent(id.clone()))?,
            );
        }
        Ok((out, excluded))
    }

    pub fn individual(
        &self,
        task_id: &str,
        selector: Option<&[String]>,
    ) -> Result<(Vec<AgentAnswer>, usize), QueryError> {
        self.task(task_id)?;
        let (agents, excluded) = self.select(selector)?;
        let answers = agents
            .into_iter()
            .map(|a| AgentAnswer { agent_id: a.agent_id.clone(), answer: a.answers.get(task_id).cloned() })
            .collect();
        Ok((answers, excluded))
    }
}

/// Per-agent answers for one condition from a runner `trace.jsonl`.
pub fn answers_from_traces(
    path: &Path,
    condition: &str,
) -> Result<BTreeMap<String, BTreeMap<String, AnswerValue>>, ServerError> {
    let text = std::fs::read_to_string(path).map_err(|source| ServerError::Io { path: path.into(), source })?;
    let mut out: BTreeMap<String, BTreeMap<String, AnswerValue>> = BTreeMap::new();
    for (n, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let t: PredictionTrace = serde_json::from_str(line)
            .map_err(|e| ServerError::Config(format!("{}:{}: {e}", path.display(), n + 1)))?;
        if t.condition.as_deref() != Some(condition) {
            continue;
        }
        if let Some(v) = t.parsed {
            out.entry(t.agent_id).or_default().insert(t.item_id, v);
        }
    }
    Ok(out)
}

/// Participant ids listed one per line; blank lines and `#` comments skipped.
pub fn read_withdrawn_ids(path: &Path) -> Result<BTreeSet<String>, ServerError> {
    let text = std::fs::read_to_string(path).map_err(|source| ServerError::Io { path: path.into(), source })?;
    Ok(text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')).map(String::from).collect())
}

#[cfg(test)]
pub(crate) mod tests {
    use agentbank::corpus::ParticipantRecord;

    use super::*;

    /// `n` agents; the first `conservatives` are conservative, the rest liberal.
    /// Each answers polviews with option `i % 3` and age 30 + i.
    pub(crate) fn bank(n: usize, conservatives: usize, withdrawn: &[usize]) -> AgentBank {
        let mut table = ParticipantTable::default();
        table.schema.insert("ideology".into(), vec!["liberal".into(), "conservative".into()]);
        let mut answers = BTreeMap::new();
        for i in 0..n {
            let id = format!("a{i:03}");
            let label = if i < conservatives { "conservative" } else { "liberal" };
            table.participants.push(ParticipantRecord {
                participant_id: id.clone(),
                pseudonym: id.clone(),
                demographics: [("ideology".to_string(), DemographicValue::One(label.into()))].into(),
                withdrawn: withdrawn.contains(&i),
            });
            answers.insert(
                id,
                [
                    ("polviews".to_string(), AnswerValue::Option(i % 3)),
                    ("age".into(), AnswerValue::Number(30.0 + i as f64)),
                ]
                .into(),
            );
        }
        AgentBank::new(&table, answers, &[Battery::synthetic_gss()], &BTreeSet::new()).unwrap()
    }

    fn ideology(label: &str) -> Filter {
        [("ideology".to_string(), vec![label.to_string()])].into()
    }

    #[test]
    fn histogram_sums_to_population() {
        let b = bank(12, 0, &[]);
        let r = b.aggregate("polviews", &Filter::new(), 10).unwrap();
        let AggregateValue::Categorical { counts } = &r.value else { panic!() };
        assert_eq!(counts.len(), 7);
        assert_eq!(counts.iter().map(|c| c.count).sum::<usize>(), 12);
        assert_eq!(counts[..3].iter().map(|c| c.count).collect::<Vec<_>>(), [4, 4, 4]);
    }

    #[test]
    fn numeric_mean_and_sample_std() {
        let b = bank(10, 0, &[]);
        let r = b.aggregate("age", &Filter::new(), 10).unwrap();
        let AggregateValue::Numeric { mean, std } = r.value else { panic!() };
        assert!((mean - 34.5).abs() < 1e-12);
        // sample std of 0..9
        assert!((std - (82.5f64 / 9.0).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn k_min_gate() {
        let b = bank(20, 9, &[]);
        assert_eq!(
            b.aggregate("polviews", &ideology("conservative"), 10).unwrap_err(),
            QueryError::BelowKMin { matching: 9, k_min: 10 }
        );
        assert_eq!(b.aggregate("polviews", &ideology("liberal"), 10).unwrap().n, 11);
        assert!(matches!(
            b.aggregate("polviews", &ideology("green"), 10),
            Err(QueryError::BelowKMin { matching: 0, .. })
        ));
        assert!(matches!(b.aggregate("nope", &Filter::new(), 10), Err(QueryError::UnknownTask(_))));
        let bad: Filter = [("income".to_string(), vec!["x".to_string()])].into();
        assert!(matches!(b.aggregate("polviews", &bad, 10), Err(QueryError::UnknownAttribute(_))));
    }

    #[test]
    fn withdrawn_are_excluded_and_counted() {
        let b = bank(4, 0, &[2]);
        assert_eq!(b.agents.len(), 3);
        let ids: Vec<String> = ["a000", "a002", "a003"].map(String::from).to_vec();
        let (answers, excluded) = b.individual("polviews", Some(&ids)).unwrap();
        assert_eq!(excluded, 1);
        assert_eq!(answers.iter().map(|a| a.agent_id.as_str()).collect::<Vec<_>>(), ["a000", "a003"]);
        assert_eq!(answers[1].answer, Some(AnswerValue::Option(0)));
        assert!(matches!(b.individual("polviews", Some(&["zz".to_string()])), Err(QueryError::UnknownAgent(_))));
    }
}
