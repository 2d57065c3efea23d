use std::path::{Path, PathBuf};

use agentbank::runner::BackendSpec;
use serde::{Deserialize, Serialize};

use crate::ServerError;

fn default_port() -> u16 {
    8080
}

fn default_host() -> String {
    "127.0.0.1".into()
}

fn default_k_min() -> usize {
    10
}

fn default_condition() -> String {
    "interview".into()
}

fn default_audit() -> PathBuf {
    PathBuf::from("audit.jsonl")
}

fn default_sessions() -> PathBuf {
    PathBuf::from("sessions")
}

fn default_batteries() -> Vec<String> {
    ["bundled:gss", "bundled:bfi44", "bundled:games"].map(String::from).to_vec()
}

/// `bank.toml`. Relative paths resolve against the file's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BankConfig {
    #[serde(default = "default_host")]
    pub host: String,
    #[serde(default = "default_port")]
    pub port: u16,
    #[serde(default = "default_k_min")]
    pub k_min: usize,
    /// TOML file with `[[token]]` entries.
    pub tokens: PathBuf,
    pub corpus: PathBuf,
    /// `trace.jsonl` from a prediction study; agents without one have no answers.
    #[serde(default)]
    pub predictions: Option<PathBuf>,
    /// Which conditioning variant's predictions the bank serves.
    #[serde(default = "default_condition")]
    pub condition: String,
    #[serde(default = "default_batteries")]
    pub batteries: Vec<String>,
    /// One participant id per line; excluded on top of the corpus flags.
    #[serde(default)]
    pub withdrawn_ids: Option<PathBuf>,
    #[serde(default = "default_audit")]
    pub audit_log: PathBuf,
    #[serde(default)]
    pub proposals: Option<PathBuf>,
    /// Backend for free prompts and interview sessions.
    #[serde(default)]
    pub backend: Option<BackendSpec>,
    #[serde(default)]
    pub seed: u64,
    /// Interview script for `POST /session`.
    #[serde(default)]
    pub script: Option<PathBuf>,
    #[serde(default = "default_sessions")]
    pub session_dir: PathBuf,
}

impl BankConfig {
    pub fn from_toml(text: &str) -> Result<Self, ServerError> {
        let c: BankConfig = toml::from_str(text).map_err(|e| ServerError::Config(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self, ServerError> {
        let text = std::fs::read_to_string(path).map_err(|source| ServerError::Io { path: path.into(), source })?;
        let c = Self::from_toml(&text)?;
        Ok(c.rebased(path.parent().unwrap_or(Path::new("."))))
    }

    pub fn validate(&self) -> Result<(), ServerError> {
        if self.k_min == 0 {
            return Err(ServerError::Config("k_min must be at least 1".into()));
        }
        Ok(())
    }

    /// Resolves every relative path against `base`.
    pub fn rebased(mut self, base: &Path) -> Self {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.tokens);
        fix(&mut self.corpus);
        fix(&mut self.audit_log);
        fix(&mut self.session_dir);
        for p in [&mut self.predictions, &mut self.withdrawn_ids, &mut self.proposals, &mut self.script]
            .into_iter()
            .flatten()
        {
            fix(p);
        }
        if let Some(BackendSpec::Mock { script }) = &mut self.backend {
            fix(script);
        }
        for b in &mut self.batteries {
            if !b.starts_with("bundled:") && Path::new(b.as_str()).is_relative() {
                *b = base.join(&*b).to_string_lossy().into_owned();
            }
        }
        self
    }
}
