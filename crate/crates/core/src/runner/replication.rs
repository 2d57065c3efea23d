use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::plan::{Backends, StudyPlan};
use super::prediction::ParseFailure;
use super::{build_agent, fmt_opt, subject_seed, thread_pool, Population, RunnerError, Subject};
use crate::agent::{answer_text, AgentEngine, AgentError, AgentMemory, EngineConfig, PredictionTrace, Variant};
use crate::battery::{Battery, ExperimentSpec, Instrument, TestKind};
use crate::corpus::CorpusDir;
use crate::llm::ChatBackend;
use crate::stats::{anova_2x2_interaction, chi2_equal_proportions, pearson, pearson_ci, t_test_ind, TestResult};

/// One coded outcome of one experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentOutcome {
    pub subject_id: String,
    pub exp_id: String,
    pub condition: String,
    pub value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Positive,
    Negative,
    /// Not significant at the plan's alpha.
    Abstain,
}

/// Test result for one sample (humans or one agent condition).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmResult {
    pub n_by_condition: BTreeMap<String, usize>,
    pub result: Option<TestResult>,
    /// Why the test could not be computed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub direction: Direction,
    /// Agent arms only: same significant direction as the humans.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub replicated: Option<bool>,
}

/// Applies the experiment's test to `(condition, value)` pairs. A test that
/// cannot be computed (an empty cell, zero variance) yields an abstaining arm.
pub fn analyze_experiment(spec: &ExperimentSpec, outcomes: &[(&str, f64)], alpha: f64) -> ArmResult {
    let mut by_cond: BTreeMap<&str, Vec<f64>> =
        spec.conditions.iter().map(|c| (c.label.as_str(), Vec::new())).collect();
    for (c, v) in outcomes {
        if let Some(vs) = by_cond.get_mut(c) {
            vs.push(*v);
        }
    }
    let n_by_condition = by_cond.iter().map(|(k, v)| (k.to_string(), v.len())).collect();
    let group = |i: usize| by_cond[spec.conditions[i].label.as_str()].clone();
    let result = match spec.test {
        TestKind::Chi2EqualProp => {
            let row = |vs: Vec<f64>| {
                let pos = vs.iter().filter(|v| **v == 1.0).count() as f64;
                [pos, vs.len() as f64 - pos]
            };
            chi2_equal_proportions([row(group(0)), row(group(1))])
        }
        TestKind::TInd => t_test_ind(&group(0), &group(1)),
        TestKind::Anova2x2Interaction => {
            let mut cells: [[Vec<f64>; 2]; 2] = Default::default();
            for (i, c) in spec.conditions.iter().enumerate() {
                let [a, b] = c.factors.expect("validated 2x2 design");
                cells[a][b] = group(i);
            }
            anova_2x2_interaction(&cells)
        }
    };
    match result {
        Ok(r) => {
            let direction = if r.p_value < alpha {
                let sign = r.effect_size_d.unwrap_or(r.statistic);
                if sign >= 0.0 {
                    Direction::Positive
                } else {
                    Direction::Negative
                }
            } else {
                Direction::Abstain
            };
            ArmResult { n_by_condition, result: Some(r), error: None, direction, replicated: None }
        }
        Err(e) => ArmResult {
            n_by_condition,
            result: None,
            error: Some(e.to_string()),
            direction: Direction::Abstain,
            replicated: None,
        },
    }
}

/// Human outcomes read from phase-1 answers keyed `<exp>:<condition>`.
pub fn human_outcomes(subjects: &[Subject], battery: &Battery) -> Result<Vec<ExperimentOutcome>, RunnerError> {
    let mut out = Vec::new();
    for s in subjects {
        for spec in &battery.experiments {
            for c in &spec.conditions {
                let Some(answer) = s.phase1.get(&format!("{}:{}", spec.exp_id, c.label)) else { continue };
                out.push(ExperimentOutcome {
                    subject_id: s.id().to_string(),
                    exp_id: spec.exp_id.to_string(),
                    condition: c.label.clone(),
                    value: spec.code_outcome(answer)?,
                });
            }
        }
    }
    Ok(out)
}

/// What one agent did across the experiments.
#[derive(Debug, Clone, Default)]
pub struct AgentReplication {
    pub outcomes: Vec<ExperimentOutcome>,
    /// Experiment order each agent saw.
    pub orders: BTreeMap<String, Vec<String>>,
    pub traces: Vec<PredictionTrace>,
    pub failures: Vec<ParseFailure>,
}

impl AgentReplication {
    fn merge(mut self, other: AgentReplication) -> Self {
        self.outcomes.extend(other.outcomes);
        self.orders.extend(other.orders);
        self.traces.extend(other.traces);
        self.failures.extend(other.failures);
        self
    }
}

/// Runs every experiment on one agent in a seeded random order. Each stimulus
/// and the agent's answer become part of its memory for what follows.
fn administer<B: ChatBackend + ?Sized>(
    backend: &B,
    config: &EngineConfig,
    mut memory: AgentMemory,
    battery: &Battery,
    seed: u64,
    condition_tag: &str,
) -> Result<AgentReplication, RunnerError> {
    let engine = AgentEngine::new(backend, config.clone());
    let id = memory.agent_id.clone();
    let mut order: Vec<&ExperimentSpec> = battery.experiments.iter().collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(subject_seed(seed, "order", &id)));
    let mut rep = AgentReplication::default();
    rep.orders.insert(id.clone(), order.iter().map(|e| e.exp_id.to_string()).collect());
    for spec in order {
        let cond = spec.assign(&id, seed);
        let item_id = format!("{}:{}", spec.exp_id, cond.label);
        let item =
            battery.item(&item_id).ok_or_else(|| RunnerError::invalid(format!("battery has no item `{item_id}`")))?;
        memory.append_stimulus(&cond.stimulus)?;
        match engine.predict(&memory, item, battery) {
            Ok((answer, trace)) => {
                rep.outcomes.push(ExperimentOutcome {
                    subject_id: id.clone(),
                    exp_id: spec.exp_id.to_string(),
                    condition: cond.label.clone(),
                    value: spec.code_outcome(&answer)?,
                });
                rep.traces.push(trace);
                let text = answer_text(item, battery, &answer).unwrap_or_default();
                memory.append_stimulus(&format!(
                    "Asked \"{}\", the participant answered: {text}",
                    spec.outcome.question()
                ))?;
            }
            Err(AgentError::Parse { raw, attempts }) => rep.failures.push(ParseFailure {
                subject_id: id.clone(),
                condition: condition_tag.to_string(),
                item_id,
                raw_output: raw,
                attempts,
            }),
            Err(e) => return Err(e.into()),
        }
    }
    Ok(rep)
}

/// Replicates the experiments on an in-memory population sharing one backend.
/// Results are merged in input order.
pub fn replicate_agents<B: ChatBackend>(
    backend: &B,
    config: &EngineConfig,
    agents: Vec<AgentMemory>,
    battery: &Battery,
    seed: u64,
    parallelism: usize,
) -> Result<AgentReplication, RunnerError> {
    let parts: Vec<AgentReplication> = thread_pool(parallelism)?.install(|| {
        agents.into_par_iter().map(|m| administer(backend, config, m, battery, seed, "agent")).collect::<Result<_, _>>()
    })?;
    Ok(parts.into_iter().fold(AgentReplication::default(), AgentReplication::merge))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyReplication {
    pub exp_id: String,
    pub test: TestKind,
    pub human: ArmResult,
    pub agents: BTreeMap<String, ArmResult>,
}

/// Correlation between human and agent effect sizes across studies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffectSizeCorrelation {
    pub n_studies: usize,
    pub r: Option<f64>,
    pub ci95: Option<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationReport {
    pub seed: u64,
    pub alpha: f64,
    pub studies: Vec<StudyReplication>,
    pub effect_size_correlation: BTreeMap<String, EffectSizeCorrelation>,
    /// condition → agent → experiment order.
    pub orders: BTreeMap<String, BTreeMap<String, Vec<String>>>,
    pub parse_failures: Vec<ParseFailure>,
}

fn pairs_for<'a>(outcomes: &'a [ExperimentOutcome], exp_id: &str) -> Vec<(&'a str, f64)> {
    outcomes.iter().filter(|o| o.exp_id == exp_id).map(|o| (o.condition.as_str(), o.value)).collect()
}

/// Effect-size correlation over studies where both samples have a d.
pub fn effect_size_correlation(human: &[Option<f64>], agent: &[Option<f64>]) -> EffectSizeCorrelation {
    let (a, b): (Vec<f64>, Vec<f64>) = human.iter().zip(agent).filter_map(|(h, g)| Some(((*h)?, (*g)?))).unzip();
    let r = pearson(&a, &b).ok();
    let ci95 = r.and_then(|r| pearson_ci(r, a.len(), 0.95).ok());
    EffectSizeCorrelation { n_studies: a.len(), r, ci95 }
}

/// Assembles per-study results from human and per-condition agent outcomes.
pub fn build_replication_report(
    battery: &Battery,
    human: &[ExperimentOutcome],
    agents: &BTreeMap<String, AgentReplication>,
    seed: u64,
    alpha: f64,
) -> ReplicationReport {
    let d_of = |arm: &ArmResult| arm.result.as_ref().and_then(|r| r.effect_size_d);
    let mut studies = Vec::new();
    for spec in &battery.experiments {
        let exp = spec.exp_id.to_string();
        let human_arm = analyze_experiment(spec, &pairs_for(human, &exp), alpha);
        let agent_arms = agents
            .iter()
            .map(|(cond, rep)| {
                let mut arm = analyze_experiment(spec, &pairs_for(&rep.outcomes, &exp), alpha);
                arm.replicated =
                    Some(human_arm.direction != Direction::Abstain && arm.direction == human_arm.direction);
                (cond.clone(), arm)
            })
            .collect();
        studies.push(StudyReplication { exp_id: exp, test: spec.test, human: human_arm, agents: agent_arms });
    }
    let human_d: Vec<Option<f64>> = studies.iter().map(|s| d_of(&s.human)).collect();
    let effect_size_correlation = agents
        .keys()
        .map(|cond| {
            let agent_d: Vec<Option<f64>> = studies.iter().map(|s| d_of(&s.agents[cond])).collect();
            (cond.clone(), effect_size_correlation(&human_d, &agent_d))
        })
        .collect();
    ReplicationReport {
        seed,
        alpha,
        studies,
        effect_size_correlation,
        orders: agents.iter().map(|(c, r)| (c.clone(), r.orders.clone())).collect(),
        parse_failures: agents.values().flat_map(|r| r.failures.iter().cloned()).collect(),
    }
}

/// Runs the experiments on every subject's agent under each plan condition
/// and compares with the humans' own experiment answers.
pub fn run_replication_study(plan: &StudyPlan) -> Result<(ReplicationReport, Vec<PredictionTrace>), RunnerError> {
    plan.validate()?;
    let batteries = plan.load_batteries()?;
    let battery = batteries
        .iter()
        .find(|b| b.instrument == Instrument::Experiments)
        .ok_or_else(|| RunnerError::invalid("replication needs the experiments battery"))?;
    let population = Population::load(&CorpusDir::new(&plan.corpus))?;
    let backends = Backends::build(&plan.backend, &batteries, plan.seed)?;
    let threads = if backends.order_sensitive() { 1 } else { plan.parallelism };
    let config = plan.engine_config();
    let pool = thread_pool(threads)?;
    let mut agents = BTreeMap::new();
    let mut traces = Vec::new();
    for &variant in &plan.conditions {
        let tag = variant.to_string();
        let parts: Vec<AgentReplication> = pool.install(|| {
            population
                .subjects
                .par_iter()
                .map(|s| {
                    let backend = backends.for_subject(s);
                    let memory = build_agent(s, variant, &batteries, &*backend, plan.seed)?;
                    administer(&*backend, &config, memory, battery, plan.seed, &tag)
                })
                .collect::<Result<_, RunnerError>>()
        })?;
        let merged = parts.into_iter().fold(AgentReplication::default(), AgentReplication::merge);
        traces.extend(merged.traces.iter().cloned());
        agents.insert(tag, merged);
    }
    let human = human_outcomes(&population.subjects, battery)?;
    Ok((build_replication_report(battery, &human, &agents, plan.seed, plan.alpha), traces))
}

fn variant_label(v: &str) -> String {
    v.parse::<Variant>().map(|v| v.to_string()).unwrap_or_else(|_| v.to_string())
}

impl ReplicationReport {
    fn lines(&self) -> Vec<(String, String, &ArmResult)> {
        let mut out = Vec::new();
        for s in &self.studies {
            out.push((s.exp_id.clone(), "human".to_string(), &s.human));
            for (c, arm) in &s.agents {
                out.push((s.exp_id.clone(), variant_label(c), arm));
            }
        }
        out
    }

    pub fn to_csv(&self) -> String {
        #[derive(Serialize)]
        struct Line<'a> {
            exp_id: &'a str,
            sample: &'a str,
            n: usize,
            statistic: Option<f64>,
            df1: Option<f64>,
            df2: Option<f64>,
            p_value: Option<f64>,
            d: Option<f64>,
            direction: Direction,
            replicated: Option<bool>,
        }
        let mut w = csv::Writer::from_writer(Vec::new());
        for (exp, sample, arm) in self.lines() {
            let r = arm.result.as_ref();
            w.serialize(Line {
                exp_id: &exp,
                sample: &sample,
                n: arm.n_by_condition.values().sum(),
                statistic: r.map(|r| r.statistic),
                df1: r.map(|r| r.df1),
                df2: r.and_then(|r| r.df2),
                p_value: r.map(|r| r.p_value),
                d: r.and_then(|r| r.effect_size_d),
                direction: arm.direction,
                replicated: arm.replicated,
            })
            .expect("csv serialization");
        }
        String::from_utf8(w.into_inner().expect("csv flush")).expect("csv is utf-8")
    }

    pub fn to_markdown(&self) -> String {
        let mut s = format!("# Replication study\n\nseed {}, alpha {}\n\n", self.seed, self.alpha);
        s.push_str("| study | sample | n | p | d | direction | replicated |\n|---|---|---|---|---|---|---|\n");
        for (exp, sample, arm) in self.lines() {
            let r = arm.result.as_ref();
            s.push_str(&format!(
                "| {exp} | {sample} | {} | {} | {} | {:?} | {} |\n",
                arm.n_by_condition.values().sum::<usize>(),
                fmt_opt(r.map(|r| r.p_value)),
                fmt_opt(r.and_then(|r| r.effect_size_d)),
                arm.direction,
                arm.replicated.map(|b| if b { "yes" } else { "no" }).unwrap_or("-"),
            ));
        }
        for (c, e) in &self.effect_size_correlation {
            s.push_str(&format!("\neffect-size r ({c}): {} over {} studies", fmt_opt(e.r), e.n_studies));
        }
        s.push('\n');
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agent::ConditioningMaterial;
    use crate::battery::ExperimentId;
    use crate::llm::FnBackend;
    use crate::runner::BackendSpec;

    fn experiments() -> Battery {
        Battery::experiments()
    }

    fn spec(b: &Battery, id: ExperimentId) -> &ExperimentSpec {
        b.experiment(id.as_str()).unwrap()
    }

    #[test]
    fn chi2_arm_from_coded_outcomes() {
        let b = experiments();
        let s = spec(&b, ExperimentId::Schilke2015);
        let mut pairs = Vec::new();
        for (label, pos) in [("high_power", 30), ("low_power", 10)] {
            pairs.extend((0..40).map(|i| (label, if i < pos { 1.0 } else { 0.0 })));
        }
        let arm = analyze_experiment(s, &pairs, 0.05);
        let r = arm.result.unwrap();
        assert!((r.statistic - 20.0).abs() < 1e-9);
        assert_eq!(arm.direction, Direction::Positive);
        assert_eq!(arm.n_by_condition["low_power"], 40);
    }

    #[test]
    fn empty_cell_abstains_with_reason() {
        let b = experiments();
        let arm =
            analyze_experiment(spec(&b, ExperimentId::Rai2017), &[("dehumanized", 3.0), ("dehumanized", 4.0)], 0.05);
        assert!(arm.result.is_none());
        assert!(arm.error.is_some());
        assert_eq!(arm.direction, Direction::Abstain);
    }

    #[test]
    fn identical_human_and_agent_arrays_give_r_one() {
        let d = [Some(0.2), Some(0.9), None, Some(-0.4), Some(1.3)];
        let e = effect_size_correlation(&d, &d);
        assert_eq!(e.n_studies, 4);
        assert!((e.r.unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(e.ci95, Some((1.0, 1.0)));
    }

    #[test]
    fn agents_see_each_stimulus_and_a_recorded_order() {
        let b = experiments();
        let backend = FnBackend::new(|req| {
            let p = req.concatenated_text();
            Ok(if p.contains("Range:") { "Response: 4".into() } else { "Response: 1".into() })
        });
        let agents: Vec<AgentMemory> = (0..6)
            .map(|i| {
                AgentMemory::new(
                    format!("a{i}"),
                    ConditioningMaterial::new(Variant::Persona, "Someone.", vec![]).unwrap(),
                )
            })
            .collect();
        let rep = replicate_agents(&backend, &EngineConfig::default(), agents, &b, 3, 2).unwrap();
        assert_eq!(rep.outcomes.len(), 30);
        assert_eq!(rep.orders.len(), 6);
        for order in rep.orders.values() {
            let mut sorted = order.clone();
            sorted.sort();
            assert_eq!(sorted, ["ames2015", "cooney2016", "halevy2015", "rai2017", "schilke2015"]);
        }
        let last = rep.traces.iter().filter(|t| t.agent_id == "a0").count();
        assert_eq!(last, 5);
        for o in &rep.outcomes {
            assert_eq!(o.condition, b.experiment(&o.exp_id).unwrap().assign(&o.subject_id, 3).label);
        }
    }

    #[test]
    fn fixture_study_runs_with_echo() {
        let plan = StudyPlan {
            corpus: concat!(env!("CARGO_MANIFEST_DIR"), "/../../fixtures/corpus").into(),
            batteries: vec!["bundled:gss".into(), "bundled:experiments".into()],
            conditions: vec![Variant::Demographic],
            seed: 7,
            backend: BackendSpec::Echo,
            output_dir: "out".into(),
            parallelism: 2,
            engine: None,
            alpha: 0.05,
            bias_attributes: vec![],
        };
        let (report, traces) = run_replication_study(&plan).unwrap();
        assert_eq!(report.studies.len(), 5);
        assert_eq!(traces.len(), 25);
        assert_eq!(report.orders["demographic"].len(), 5);
        for s in &report.studies {
            assert_eq!(s.human.n_by_condition.values().sum::<usize>(), 5);
        }
        let again = run_replication_study(&plan).unwrap().0;
        assert_eq!(report, again);
    }
}
