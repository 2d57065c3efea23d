use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::oracle::{EchoBackend, UniformBackend};
use super::{RunnerError, Subject};
use crate::agent::{EngineConfig, Variant};
use crate::battery::{Battery, Instrument};
use crate::corpus::load_json;
use crate::llm::{ChatBackend, RemoteBackend, RemoteConfig, ScriptedMock};

/// Which chat backend a study talks to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BackendSpec {
    /// Answers every prediction with the subject's own phase-1 answer.
    Echo,
    /// Picks an option or a point in the range from a hash of seed and prompt.
    Uniform,
    /// A JSON list of mock rules.
    Mock { script: PathBuf },
    /// OpenAI-compatible endpoint; the base URL falls back to the environment.
    Remote {
        model: String,
        #[serde(default)]
        base_url: Option<String>,
        #[serde(default)]
        rate_limit: Option<(u32, f64)>,
    },
}

fn default_batteries() -> Vec<String> {
    ["bundled:gss", "bundled:bfi44", "bundled:games", "bundled:experiments"].map(String::from).to_vec()
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

fn default_alpha() -> f64 {
    0.05
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyPlan {
    pub corpus: PathBuf,
    /// `bundled:gss|bfi44|games|experiments` or a battery file path.
    #[serde(default = "default_batteries")]
    pub batteries: Vec<String>,
    pub conditions: Vec<Variant>,
    #[serde(default)]
    pub seed: u64,
    pub backend: BackendSpec,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
    /// Worker threads; 0 lets the pool decide.
    #[serde(default)]
    pub parallelism: usize,
    #[serde(default)]
    pub engine: Option<EngineConfig>,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    /// Demographic attributes for the bias study; empty means all in the schema.
    #[serde(default)]
    pub bias_attributes: Vec<String>,
}

impl StudyPlan {
    pub fn load(path: &Path) -> Result<Self, RunnerError> {
        let plan: StudyPlan = load_json(path)?;
        plan.validate()?;
        Ok(plan)
    }

    pub fn validate(&self) -> Result<(), RunnerError> {
        if self.conditions.is_empty() {
            return Err(RunnerError::invalid("plan lists no conditions"));
        }
        if self.batteries.is_empty() {
            return Err(RunnerError::invalid("plan lists no batteries"));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(RunnerError::invalid(format!("alpha {} is not in (0, 1)", self.alpha)));
        }
        Ok(())
    }

    /// Resolves relative paths against `base`.
    pub fn rebased(mut self, base: &Path) -> Self {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.corpus);
        fix(&mut self.output_dir);
        if let BackendSpec::Mock { script } = &mut self.backend {
            fix(script);
        }
        for b in &mut self.batteries {
            if !b.starts_with("bundled:") && Path::new(b.as_str()).is_relative() {
                *b = base.join(b.as_str()).to_string_lossy().into_owned();
            }
        }
        self
    }

    pub fn engine_config(&self) -> EngineConfig {
        self.engine.clone().unwrap_or_default()
    }

    pub fn load_batteries(&self) -> Result<Vec<Battery>, RunnerError> {
        self.batteries.iter().map(|r| load_battery(r)).collect()
    }
}

pub fn load_battery(reference: &str) -> Result<Battery, RunnerError> {
    Ok(match reference {
        "bundled:gss" => Battery::synthetic_gss(),
        "bundled:bfi44" => Battery::bfi44(),
        "bundled:games" => Battery::games(),
        "bundled:experiments" => Battery::experiments(),
        r if r.starts_with("bundled:") => return Err(RunnerError::invalid(format!("unknown bundled battery `{r}`"))),
        path => Battery::load(Path::new(path))?,
    })
}

/// Instantiated backend. Echo needs the subject's answers, so it is built per subject.
#[derive(Clone)]
pub enum Backends {
    Echo(Arc<Vec<Battery>>),
    Uniform(u64),
    Shared(Arc<dyn ChatBackend>),
}

impl Backends {
    pub fn build(spec: &BackendSpec, batteries: &[Battery], seed: u64) -> Result<Self, RunnerError> {
        Ok(match spec {
            BackendSpec::Echo => Backends::Echo(Arc::new(batteries.to_vec())),
            BackendSpec::Uniform => Backends::Uniform(seed),
            BackendSpec::Mock { script } => Backends::Shared(Arc::new(ScriptedMock::from_file(script)?)),
            BackendSpec::Remote { model, base_url, rate_limit } => {
                let mut config = match base_url {
                    Some(url) => RemoteConfig {
                        base_url: url.clone(),
                        api_key: std::env::var(crate::llm::ENV_API_KEY).ok(),
                        model: model.clone(),
                        retry: Default::default(),
                        timeout_secs: 120,
                        rate_limit: None,
                    },
                    None => RemoteConfig::from_env(model.clone())?,
                };
                config.rate_limit = *rate_limit;
                Backends::Shared(Arc::new(RemoteBackend::new(config)?))
            }
        })
    }

    pub fn for_subject(&self, subject: &Subject) -> Arc<dyn ChatBackend> {
        match self {
            Backends::Echo(b) => Arc::new(EchoBackend::new(subject.phase1.clone(), Arc::clone(b))),
            Backends::Uniform(seed) => Arc::new(UniformBackend::new(*seed)),
            Backends::Shared(b) => Arc::clone(b),
        }
    }

    /// Backend for work not tied to a subject, such as interviews. The oracles
    /// only answer their fixed auxiliary prompts there.
    pub fn conversational(&self) -> Arc<dyn ChatBackend> {
        match self {
            Backends::Echo(_) => Arc::new(UniformBackend::new(0)),
            Backends::Uniform(seed) => Arc::new(UniformBackend::new(*seed)),
            Backends::Shared(b) => Arc::clone(b),
        }
    }

    /// Scripted mocks may hold use-limited rules, so their answers depend on call order.
    pub fn order_sensitive(&self) -> bool {
        matches!(self, Backends::Shared(_))
    }
}

/// Batteries scored for fidelity (everything but experiments).
pub fn scored_batteries(batteries: &[Battery]) -> Vec<&Battery> {
    batteries.iter().filter(|b| b.instrument != Instrument::Experiments).collect()
}
