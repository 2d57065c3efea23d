//! Generative agents: conditioning material, expert reflections, expert
//! classification and chain-of-thought prediction prompts.

mod material;
pub mod prompts;
mod reflect;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::battery::{Battery, BatteryError, BatteryItem, GameId, GameSpec, ItemKind, OutcomeSpec};
use crate::corpus::AnswerValue;
use crate::interviewer::prompts::fill;
use crate::llm::{prompt_hash, ChatBackend, ChatRequest, LlmError};
use prompts::*;

pub(crate) use material::answer_text;
pub use material::{
    build_composite_material, build_demographic_material, lesion_transcript, summarize_material, Composite,
    CompositeLine, Demographics,
};
pub use reflect::{classify_expert, generate_expert_reflections, parse_expert, parse_observations, MAX_OBSERVATIONS};

#[derive(Debug, Error)]
pub enum AgentError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("could not parse a prediction after {attempts} attempt(s); last output: {raw}")]
    Parse { raw: String, attempts: u32 },
    #[error(transparent)]
    Backend(#[from] LlmError),
    #[error(transparent)]
    Battery(#[from] BatteryError),
}

pub(crate) fn invalid(msg: impl Into<String>) -> AgentError {
    AgentError::InvalidArgument(msg.into())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Variant {
    Interview,
    Demographic,
    Persona,
    Composite,
    Summary,
    /// Fraction removed, in fifths (0..=4).
    Lesioned(u8),
    Maximal,
}

impl Variant {
    pub fn lesioned(fraction: f64) -> Result<Self, AgentError> {
        let fifths = (fraction * 5.0).round();
        if (fraction * 5.0 - fifths).abs() > 1e-9 || !(0.0..=4.0).contains(&fifths) {
            return Err(invalid(format!("lesion fraction {fraction} is not one of 0, 0.2, 0.4, 0.6, 0.8")));
        }
        Ok(Variant::Lesioned(fifths as u8))
    }

    pub fn lesion_fraction(self) -> Option<f64> {
        match self {
            Variant::Lesioned(f) => Some(f as f64 / 5.0),
            _ => None,
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Variant::Interview => f.write_str("interview"),
            Variant::Demographic => f.write_str("demographic"),
            Variant::Persona => f.write_str("persona"),
            Variant::Composite => f.write_str("composite"),
            Variant::Summary => f.write_str("summary"),
            Variant::Lesioned(n) => write!(f, "lesioned:{:.1}", *n as f64 / 5.0),
            Variant::Maximal => f.write_str("maximal"),
        }
    }
}

impl FromStr for Variant {
    type Err = AgentError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "interview" => Variant::Interview,
            "demographic" => Variant::Demographic,
            "persona" => Variant::Persona,
            "composite" => Variant::Composite,
            "summary" => Variant::Summary,
            "maximal" => Variant::Maximal,
            _ => match s.strip_prefix("lesioned:") {
                Some(f) => Variant::lesioned(f.parse().map_err(|_| invalid(format!("bad lesion fraction `{f}`")))?)?,
                None => return Err(invalid(format!("unknown conditioning variant `{s}`"))),
            },
        })
    }
}

impl TryFrom<String> for Variant {
    type Error = AgentError;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<Variant> for String {
    fn from(v: Variant) -> String {
        v.to_string()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditioningMaterial {
    pub variant: Variant,
    pub text: String,
    /// Ids of the sources the text was built from.
    #[serde(default)]
    pub provenance: Vec<String>,
}

impl ConditioningMaterial {
    pub fn new(variant: Variant, text: impl Into<String>, provenance: Vec<String>) -> Result<Self, AgentError> {
        let text = text.into();
        // composite text is rendered per query, so its base may be empty
        if text.trim().is_empty() && variant != Variant::Composite {
            return Err(invalid("conditioning text is empty"));
        }
        Ok(Self { variant, text, provenance })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Expert {
    Psychologist,
    BehavioralEconomist,
    PoliticalScientist,
    Demographer,
}

impl Expert {
    pub const ALL: [Expert; 4] =
        [Expert::Psychologist, Expert::BehavioralEconomist, Expert::PoliticalScientist, Expert::Demographer];

    pub fn name(self) -> &'static str {
        match self {
            Expert::Psychologist => "psychologist",
            Expert::BehavioralEconomist => "behavioral economist",
            Expert::PoliticalScientist => "political scientist",
            Expert::Demographer => "demographer",
        }
    }

    /// What the expert's reflections are about.
    pub fn topic(self) -> &'static str {
        match self {
            Expert::Psychologist => "personality, values and emotional life",
            Expert::BehavioralEconomist => {
                "economic decision-making, attitudes to risk and fairness, and financial situation"
            }
            Expert::PoliticalScientist => "political views, civic engagement and trust in institutions",
            Expert::Demographer => "demographic traits and social status",
        }
    }
}

/// Which reflections a query draws on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Retrieval {
    Expert(Expert),
    AllExperts,
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentMemory {
    pub agent_id: String,
    pub conditioning: ConditioningMaterial,
    /// Empty except for interview agents.
    #[serde(default)]
    pub reflections: BTreeMap<Expert, Vec<String>>,
    /// Survey answers rendered per query with same-category exclusion
    /// (composite and maximal agents).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub composite: Option<Composite>,
    #[serde(default)]
    pub experiment_events: Vec<String>,
}

impl AgentMemory {
    pub fn new(agent_id: impl Into<String>, conditioning: ConditioningMaterial) -> Self {
        Self {
            agent_id: agent_id.into(),
            conditioning,
            reflections: BTreeMap::new(),
            composite: None,
            experiment_events: Vec::new(),
        }
    }

    pub fn append_stimulus(&mut self, text: &str) -> Result<(), AgentError> {
        if text.trim().is_empty() {
            return Err(invalid("stimulus text is empty"));
        }
        self.experiment_events.push(text.to_string());
        Ok(())
    }

    pub fn has_reflections(&self) -> bool {
        self.reflections.values().any(|v| !v.is_empty())
    }

    /// Falls back to every expert when the chosen one has nothing stored.
    pub fn resolve(&self, expert: Option<Expert>) -> Retrieval {
        if !self.has_reflections() {
            return Retrieval::None;
        }
        match expert {
            Some(e) if self.reflections.get(&e).is_some_and(|v| !v.is_empty()) => Retrieval::Expert(e),
            _ => Retrieval::AllExperts,
        }
    }
}

/// What a prediction prompt asks for.
#[derive(Debug, Clone, PartialEq)]
pub enum Query {
    Categorical { question: String, options: Vec<String> },
    Numeric { question: String, min: f64, max: f64 },
}

impl Query {
    pub fn question(&self) -> &str {
        match self {
            Query::Categorical { question, .. } | Query::Numeric { question, .. } => question,
        }
    }

    pub fn render(&self) -> String {
        match self {
            Query::Categorical { question, options } => {
                let mut s = format!("{question}\nOptions:");
                for (i, o) in options.iter().enumerate() {
                    s.push_str(&format!("\n{}) {o}", i + 1));
                }
                s
            }
            Query::Numeric { question, min, max } => format!("{question}\nRange: {min} to {max}"),
        }
    }
}

pub const PD_OPTIONS: [&str; 2] = ["Cooperate", "Defect"];

/// The prompt-level view of an item.
pub fn query_for(item: &BatteryItem, battery: &Battery) -> Result<Query, AgentError> {
    let question = item.text.clone();
    Ok(match &item.kind {
        ItemKind::Categorical { options, .. } => Query::Categorical { question, options: options.clone() },
        ItemKind::Numeric { hist_min, hist_max } => Query::Numeric { question, min: *hist_min, max: *hist_max },
        ItemKind::Game { game_id: GameId::PrisonersDilemma } => {
            Query::Categorical { question, options: PD_OPTIONS.iter().map(|s| s.to_string()).collect() }
        }
        ItemKind::Game { game_id } => {
            let g = GameSpec::standard(*game_id);
            Query::Numeric { question, min: g.min, max: g.max }
        }
        ItemKind::Experiment { exp_id, .. } => match &battery.experiment(exp_id.as_str())?.outcome {
            OutcomeSpec::Choice { question, options, .. } => {
                Query::Categorical { question: question.clone(), options: options.clone() }
            }
            OutcomeSpec::Scale { question, min, max } => {
                Query::Numeric { question: question.clone(), min: *min, max: *max }
            }
        },
    })
}

/// Converts a parsed prediction into the item's answer domain.
pub fn answer_for(item: &BatteryItem, parsed: Parsed) -> AnswerValue {
    match (&item.kind, parsed) {
        (ItemKind::Game { game_id: GameId::PrisonersDilemma }, Parsed::Index(i)) => {
            AnswerValue::Choice(PD_OPTIONS[i].to_ascii_lowercase())
        }
        (_, Parsed::Index(i)) => AnswerValue::Option(i),
        (_, Parsed::Number(x)) => AnswerValue::Number(x),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Parsed {
    Index(usize),
    Number(f64),
}

/// Text that precedes the task: conditioning, reflections, then experiment events.
pub fn render_context(memory: &AgentMemory, category: Option<&str>, retrieval: Retrieval) -> String {
    let mut out = memory.conditioning.text.trim_end().to_string();
    if let Some(c) = &memory.composite {
        let lines = c.render(category);
        if !lines.is_empty() {
            if !out.is_empty() {
                out.push_str("\n\n");
            }
            out.push_str(&lines);
        }
    }
    let experts: Vec<Expert> = match retrieval {
        Retrieval::Expert(e) => vec![e],
        Retrieval::AllExperts => Expert::ALL.to_vec(),
        Retrieval::None => vec![],
    };
    for e in experts {
        let Some(obs) = memory.reflections.get(&e).filter(|o| !o.is_empty()) else { continue };
        out.push_str(&format!("\n\nReflections of an expert {}:", e.name()));
        for o in obs {
            out.push_str("\n- ");
            out.push_str(o);
        }
    }
    if !memory.experiment_events.is_empty() {
        out.push_str("\n\nWhat the participant has seen and done so far in this study:");
        for e in &memory.experiment_events {
            out.push_str("\n- ");
            out.push_str(e);
        }
    }
    out
}

/// The full prediction prompt; a pure function of its inputs.
pub fn render_prediction_prompt(
    memory: &AgentMemory,
    category: Option<&str>,
    retrieval: Retrieval,
    query: &Query,
) -> String {
    let (steps, suffix) = match query {
        Query::Categorical { .. } => (CATEGORICAL_STEPS, CATEGORICAL_SUFFIX),
        Query::Numeric { .. } => (NUMERIC_STEPS, NUMERIC_SUFFIX),
    };
    format!(
        "{}\n\n{SEPARATOR}\n\n{TASK_INTRO}\n\n{steps}\n\n{QUESTIONS_HEADER}\n\n{}\n\n{suffix}",
        render_context(memory, category, retrieval),
        query.render()
    )
}

/// Prompt for a free-text question put to the agent.
pub fn render_open_prompt(memory: &AgentMemory, retrieval: Retrieval, prompt: &str) -> String {
    format!(
        "{}\n\n{SEPARATOR}\n\n{OPEN_TASK}\n\nPrompt: {}\n\n{OPEN_SUFFIX}",
        render_context(memory, None, retrieval),
        prompt.trim()
    )
}

/// Text of the last `Response` field, or `None` if there is none.
pub fn response_field(output: &str) -> Option<String> {
    static RE: LazyLock<Regex> = LazyLock::new(|| {
        Regex::new(r#"(?im)^[\s>*#\-"(]*(?:step\s*\d\)?\s*)?[*"(]*response[*")]*\s*:[*\s]*(.*)$"#)
            .expect("static regex")
    });
    let last = RE.captures_iter(output).last()?;
    let start = last.get(0).expect("whole match").end();
    let mut value = last[1].trim().to_string();
    if value.is_empty() {
        value = output[start..].lines().map(str::trim).find(|l| !l.is_empty())?.to_string();
    }
    let wrap = |c: char| c == '*' || c == '"' || c == '\'' || c == '`' || c.is_whitespace();
    let cleaned = value.trim_matches(wrap).trim_end_matches('.').trim_matches(wrap);
    Some(cleaned.to_string())
}

fn fold(s: &str) -> String {
    s.trim().trim_end_matches(['.', '!']).split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase()
}

/// Exact option text, then case-folded text, then a leading 1-based index.
pub fn parse_option(response: &str, options: &[String]) -> Option<usize> {
    let r = response.trim();
    if let Some(i) = options.iter().position(|o| o == r) {
        return Some(i);
    }
    let f = fold(r);
    if let Some(i) = options.iter().position(|o| fold(o) == f) {
        return Some(i);
    }
    // "3) Agree" or "3"
    let digits: String = r.chars().take_while(|c| c.is_ascii_digit()).collect();
    let rest = &r[digits.len()..];
    if !digits.is_empty() && (rest.is_empty() || rest.starts_with([')', '.', ':', ' '])) {
        let n: usize = digits.parse().ok()?;
        if (1..=options.len()).contains(&n) {
            return Some(n - 1);
        }
    }
    None
}

/// First number in `response` (thousands separators allowed).
pub fn parse_number(response: &str) -> Option<f64> {
    static RE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"-?\d[\d,]*(?:\.\d+)?|-?\.\d+").expect("static regex"));
    let m = RE.find(response)?;
    m.as_str().replace(',', "").parse().ok()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionTrace {
    pub agent_id: String,
    pub item_id: String,
    pub prompt_hash: String,
    pub retrieval: Retrieval,
    pub raw_output: String,
    pub parsed: Option<AnswerValue>,
    pub attempts: u32,
    /// Conditioning variant, set by the study runner.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub condition: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EngineConfig {
    pub temperature: f64,
    pub max_attempts: u32,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self { temperature: 0.0, max_attempts: 3 }
    }
}

/// Runs prediction prompts against a backend.
pub struct AgentEngine<B> {
    backend: B,
    pub config: EngineConfig,
}

impl<B: ChatBackend> AgentEngine<B> {
    pub fn new(backend: B, config: EngineConfig) -> Self {
        Self { backend, config }
    }

    pub fn backend(&self) -> &B {
        &self.backend
    }

    fn request(&self, tag: &str, prompt: String) -> ChatRequest {
        let mut r = ChatRequest::user(tag, prompt);
        r.temperature = self.config.temperature;
        r
    }

    /// Picks the reflections for a query: classification for agents with
    /// reflections, nothing otherwise.
    pub fn retrieve(&self, memory: &AgentMemory, question: &str) -> Result<Retrieval, AgentError> {
        if !memory.has_reflections() {
            return Ok(Retrieval::None);
        }
        let expert = classify_expert(question, &self.backend)?;
        let r = memory.resolve(expert);
        if expert.is_some() && r == Retrieval::AllExperts {
            tracing::info!(agent = %memory.agent_id, "classified expert has no reflections; using all experts");
        }
        Ok(r)
    }

    fn run<T>(
        &self,
        memory: &AgentMemory,
        item_id: &str,
        prompt: String,
        retrieval: Retrieval,
        parse: impl Fn(&str) -> Option<T>,
    ) -> Result<(T, PredictionTrace), AgentError> {
        let mut trace = PredictionTrace {
            agent_id: memory.agent_id.clone(),
            item_id: item_id.to_string(),
            prompt_hash: prompt_hash(&prompt),
            retrieval,
            raw_output: String::new(),
            parsed: None,
            attempts: 0,
            condition: None,
        };
        let req = self.request(&format!("predict:{item_id}"), prompt);
        for attempt in 1..=self.config.max_attempts.max(1) {
            trace.attempts = attempt;
            trace.raw_output = self.backend.complete(&req)?;
            if let Some(v) = response_field(&trace.raw_output).and_then(|r| parse(&r)) {
                return Ok((v, trace));
            }
        }
        Err(AgentError::Parse { raw: trace.raw_output, attempts: trace.attempts })
    }

    pub fn predict_categorical(
        &self,
        memory: &AgentMemory,
        item: &BatteryItem,
        battery: &Battery,
    ) -> Result<(usize, PredictionTrace), AgentError> {
        let query = query_for(item, battery)?;
        let Query::Categorical { options, .. } = &query else {
            return Err(invalid(format!("item `{}` is not categorical", item.item_id)));
        };
        if options.len() < 2 {
            return Err(invalid(format!("item `{}` has fewer than two options", item.item_id)));
        }
        let retrieval = self.retrieve(memory, query.question())?;
        let prompt = render_prediction_prompt(memory, Some(&item.category), retrieval, &query);
        let (i, mut trace) = self.run(memory, &item.item_id, prompt, retrieval, |r| parse_option(r, options))?;
        trace.parsed = Some(answer_for(item, Parsed::Index(i)));
        Ok((i, trace))
    }

    pub fn predict_numeric(
        &self,
        memory: &AgentMemory,
        item: &BatteryItem,
        battery: &Battery,
    ) -> Result<(f64, PredictionTrace), AgentError> {
        let query = query_for(item, battery)?;
        let Query::Numeric { min, max, .. } = query else {
            return Err(invalid(format!("item `{}` is not numeric", item.item_id)));
        };
        let retrieval = self.retrieve(memory, query.question())?;
        let prompt = render_prediction_prompt(memory, Some(&item.category), retrieval, &query);
        let (x, mut trace) =
            self.run(memory, &item.item_id, prompt, retrieval, |r| parse_number(r).map(|x| x.clamp(min, max)))?;
        trace.parsed = Some(AnswerValue::Number(x));
        Ok((x, trace))
    }

    /// Predicts any item, dispatching on its prompt shape.
    pub fn predict(
        &self,
        memory: &AgentMemory,
        item: &BatteryItem,
        battery: &Battery,
    ) -> Result<(AnswerValue, PredictionTrace), AgentError> {
        match query_for(item, battery)? {
            Query::Categorical { .. } => {
                let (i, t) = self.predict_categorical(memory, item, battery)?;
                Ok((answer_for(item, Parsed::Index(i)), t))
            }
            Query::Numeric { .. } => {
                let (x, t) = self.predict_numeric(memory, item, battery)?;
                Ok((AnswerValue::Number(x), t))
            }
        }
    }

    /// Answers a free-text prompt as the agent: the text after the last
    /// `Response:` marker, or the whole output when there is none.
    pub fn respond(&self, memory: &AgentMemory, prompt: &str) -> Result<(String, PredictionTrace), AgentError> {
        if prompt.trim().is_empty() {
            return Err(invalid("prompt is empty"));
        }
        let retrieval = self.retrieve(memory, prompt)?;
        let text = render_open_prompt(memory, retrieval, prompt);
        let mut trace = PredictionTrace {
            agent_id: memory.agent_id.clone(),
            item_id: "open".into(),
            prompt_hash: prompt_hash(&text),
            retrieval,
            raw_output: String::new(),
            parsed: None,
            attempts: 1,
            condition: None,
        };
        trace.raw_output = self.backend.complete(&self.request("respond", text))?;
        let raw = trace.raw_output.trim();
        let reply = match raw.rfind("Response:").map(|i| raw[i + 9..].trim()) {
            Some(r) if !r.is_empty() => r.to_string(),
            _ => raw.to_string(),
        };
        Ok((reply, trace))
    }

    pub fn generate_expert_reflections(
        &self,
        transcript: &crate::corpus::InterviewTranscript,
    ) -> Result<BTreeMap<Expert, Vec<String>>, AgentError> {
        generate_expert_reflections(transcript, &self.backend)
    }
}

pub(crate) fn fill_template(template: &str, slots: &[(&str, &str)]) -> String {
    fill(template, slots)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::llm::{FnBackend, MockRule, ScriptedMock};

    fn memory() -> AgentMemory {
        let m = ConditioningMaterial::new(Variant::Interview, "Interviewer: Hi\nParticipant: Hello\n", vec![]).unwrap();
        AgentMemory::new("a1", m)
    }

    fn engine(rules: Vec<MockRule>) -> AgentEngine<ScriptedMock> {
        AgentEngine::new(ScriptedMock::new(rules).unwrap(), EngineConfig::default())
    }

    fn yes_no() -> BatteryItem {
        BatteryItem::categorical("q", "c", "Do you agree?", &["Yes", "No", "Unsure"], false)
    }

    #[test]
    fn variant_tags_round_trip() {
        for s in
            ["interview", "demographic", "persona", "composite", "summary", "maximal", "lesioned:0.0", "lesioned:0.8"]
        {
            assert_eq!(s.parse::<Variant>().unwrap().to_string(), s);
        }
        assert_eq!(Variant::lesioned(0.4).unwrap().lesion_fraction(), Some(0.4));
        assert!(Variant::lesioned(0.5).is_err());
        assert!("lesioned:1.0".parse::<Variant>().is_err());
        assert!("robot".parse::<Variant>().is_err());
    }

    #[test]
    fn response_field_variants() {
        assert_eq!(response_field("Reasoning: x\nResponse: No").as_deref(), Some("No"));
        assert_eq!(response_field("Step 4) Response: \"Yes\".").as_deref(), Some("Yes"));
        assert_eq!(response_field("**Response:**\n\nUnsure\n").as_deref(), Some("Unsure"));
        assert_eq!(response_field("Response: A\n...\nResponse: B").as_deref(), Some("B"));
        assert_eq!(response_field("no field here"), None);
    }

    #[test]
    fn option_parse_precedence() {
        let opts: Vec<String> = ["Yes", "No", "yes sir"].iter().map(|s| s.to_string()).collect();
        assert_eq!(parse_option("No", &opts), Some(1));
        assert_eq!(parse_option("yes", &opts), Some(0));
        assert_eq!(parse_option("3) something", &opts), Some(2));
        assert_eq!(parse_option("7", &opts), None);
        assert_eq!(parse_option("maybe", &opts), None);
    }

    #[test]
    fn number_parse() {
        assert_eq!(parse_number("I predict 42"), Some(42.0));
        assert_eq!(parse_number("about 3.5 dollars"), Some(3.5));
        assert_eq!(parse_number("1,200 hours"), Some(1200.0));
        assert_eq!(parse_number("-2 or so"), Some(-2.0));
        assert_eq!(parse_number("none"), None);
    }

    #[test]
    fn categorical_prediction_by_text() {
        let e = engine(vec![MockRule::contains("Response", "Step 1) ...\nResponse: Unsure")]);
        let (i, t) = e.predict_categorical(&memory(), &yes_no(), &Battery::synthetic_gss()).unwrap();
        assert_eq!(i, 2);
        assert_eq!(t.attempts, 1);
        assert_eq!(t.retrieval, Retrieval::None);
    }

    #[test]
    fn casefolded_binary_answer() {
        let item = BatteryItem::categorical("q", "c", "Ok?", &["Yes", "No"], false);
        let e = engine(vec![MockRule::contains("Response", "Response: yes")]);
        assert_eq!(e.predict_categorical(&memory(), &item, &Battery::synthetic_gss()).unwrap().0, 0);
    }

    #[test]
    fn unparseable_prediction_gives_up_after_three_calls() {
        let e = engine(vec![MockRule::contains("Response", "Response: none of these")]);
        match e.predict_categorical(&memory(), &yes_no(), &Battery::synthetic_gss()) {
            Err(AgentError::Parse { attempts, raw }) => {
                assert_eq!(attempts, 3);
                assert!(raw.contains("none of these"));
            }
            other => panic!("expected parse error, got {other:?}"),
        }
        assert_eq!(e.backend().use_counts(), vec![3]);
    }

    #[test]
    fn numeric_prediction_clamps() {
        let item = BatteryItem::numeric("age", "d", "Age?", 18.0, 89.0);
        let b = Battery::synthetic_gss();
        let e = engine(vec![MockRule::contains("Response", "Response: I predict 42")]);
        assert_eq!(e.predict_numeric(&memory(), &item, &b).unwrap().0, 42.0);
        let e = engine(vec![MockRule::contains("Response", "Response: 120")]);
        assert_eq!(e.predict_numeric(&memory(), &item, &b).unwrap().0, 89.0);
        let money = BatteryItem::numeric("m", "d", "Give?", 0.0, 5.0);
        let e = engine(vec![MockRule::contains("Response", "Response: about 3.5 dollars")]);
        assert_eq!(e.predict_numeric(&memory(), &money, &b).unwrap().0, 3.5);
    }

    #[test]
    fn games_map_to_their_domains() {
        let games = Battery::games();
        let pd = games.item("prisoners_dilemma").unwrap();
        let e = engine(vec![MockRule::contains("Response", "Response: Defect")]);
        let (a, _) = e.predict(&memory(), pd, &games).unwrap();
        assert_eq!(a, AnswerValue::Choice("defect".into()));
        pd.check_answer(&a).unwrap();
        let e = engine(vec![MockRule::contains("Response", "Response: 7")]);
        let (a, _) = e.predict(&memory(), games.item("dictator").unwrap(), &games).unwrap();
        assert_eq!(a, AnswerValue::Number(5.0));
    }

    #[test]
    fn prompt_is_pure_and_ordered() {
        let mut m = memory();
        m.append_stimulus("You read a story about a nursing home.").unwrap();
        m.append_stimulus("You chose the blame task.").unwrap();
        assert!(m.append_stimulus("  ").is_err());
        let q = query_for(&yes_no(), &Battery::synthetic_gss()).unwrap();
        let a = render_prediction_prompt(&m, None, Retrieval::None, &q);
        assert_eq!(a, render_prediction_prompt(&m.clone(), None, Retrieval::None, &q));
        let first = a.find("nursing home").unwrap();
        let second = a.find("blame task").unwrap();
        assert!(first < second && second < a.find(SEPARATOR).unwrap());
        assert!(a.contains("1) Yes\n2) No\n3) Unsure"));
    }

    #[test]
    fn single_expert_block_per_query() {
        let mut m = memory();
        for e in Expert::ALL {
            m.reflections.insert(e, vec![format!("note from {}", e.name())]);
        }
        let q = query_for(&yes_no(), &Battery::synthetic_gss()).unwrap();
        let p = render_prediction_prompt(&m, None, Retrieval::Expert(Expert::Demographer), &q);
        assert_eq!(p.matches("Reflections of an expert").count(), 1);
        assert!(p.contains("note from demographer"));
        let all = render_prediction_prompt(&m, None, Retrieval::AllExperts, &q);
        assert_eq!(all.matches("Reflections of an expert").count(), 4);
        // reflections follow the transcript
        assert!(p.find("Participant: Hello").unwrap() < p.find("note from").unwrap());
        m.reflections.insert(Expert::Psychologist, vec![]);
        assert_eq!(m.resolve(Some(Expert::Psychologist)), Retrieval::AllExperts);
    }

    #[test]
    fn open_prompt_returns_response_or_whole_reply() {
        let m = memory();
        let engine = AgentEngine::new(
            FnBackend::new(|req| {
                Ok(if req.concatenated_text().contains("Prompt: Where?") {
                    "Reasoning: x\nResponse: Ohio"
                } else {
                    "Ohio."
                }
                .into())
            }),
            EngineConfig::default(),
        );
        assert_eq!(engine.respond(&m, "Where?").unwrap().0, "Ohio");
        let (reply, trace) = engine.respond(&m, "Why?").unwrap();
        assert_eq!(reply, "Ohio.");
        assert_eq!(trace.item_id, "open");
        assert!(engine.respond(&m, "  ").is_err());
    }
}
