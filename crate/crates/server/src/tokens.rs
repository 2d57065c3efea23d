use std::collections::BTreeMap;
use std::path::Path;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::ServerError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tier {
    Aggregate,
    Individual,
}

/// A static bearer credential. Clients send `<token_id>.<secret>`; the file
/// keeps only the SHA-256 of the secret.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AccessToken {
    pub token_id: String,
    pub secret_sha256: String,
    pub tier: Tier,
    pub expiry: DateTime<Utc>,
    /// `task:<id>`, `task:*` or `prompt`.
    #[serde(default)]
    pub scopes: Vec<String>,
}

impl AccessToken {
    pub fn validate(&self) -> Result<(), ServerError> {
        if self.token_id.is_empty() || self.token_id.contains('.') {
            return Err(ServerError::Config(format!("bad token id `{}`", self.token_id)));
        }
        if self.tier == Tier::Individual && self.scopes.is_empty() {
            return Err(ServerError::Config(format!("individual token `{}` has no scopes", self.token_id)));
        }
        Ok(())
    }

    pub fn allows_task(&self, task_id: &str) -> bool {
        self.scopes.iter().any(|s| s == "task:*" || s.strip_prefix("task:") == Some(task_id))
    }

    pub fn allows_prompt(&self) -> bool {
        self.scopes.iter().any(|s| s == "prompt")
    }
}

pub fn hash_secret(secret: &str) -> String {
    Sha256::digest(secret.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
}

/// Token id claimed by a bearer string, whether or not it verifies.
pub fn claimed_id(bearer: &str) -> Option<&str> {
    bearer.split_once('.').map(|(id, _)| id).filter(|id| !id.is_empty())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AuthFailure {
    Missing,
    Unknown,
    Expired,
}

#[derive(Debug, Clone, Default)]
pub struct TokenStore {
    tokens: BTreeMap<String, AccessToken>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TokenFile {
    #[serde(default)]
    token: Vec<AccessToken>,
}

impl TokenStore {
    pub fn new(tokens: Vec<AccessToken>) -> Result<Self, ServerError> {
        let mut map = BTreeMap::new();
        for t in tokens {
            t.validate()?;
            if map.insert(t.token_id.clone(), t).is_some() {
                return Err(ServerError::Config("duplicate token id".into()));
            }
        }
        Ok(Self { tokens: map })
    }

    pub fn from_toml(text: &str) -> Result<Self, ServerError> {
        let f: TokenFile = toml::from_str(text).map_err(|e| ServerError::Config(format!("tokens: {e}")))?;
        Self::new(f.token)
    }

    pub fn load(path: &Path) -> Result<Self, ServerError> {
        let text = std::fs::read_to_string(path).map_err(|source| ServerError::Io { path: path.into(), source })?;
        Self::from_toml(&text)
    }

    pub fn verify(&self, bearer: Option<&str>, now: DateTime<Utc>) -> Result<&AccessToken, AuthFailure> {
        let bearer = bearer.ok_or(AuthFailure::Missing)?;
        let (id, secret) = bearer.split_once('.').ok_or(AuthFailure::Unknown)?;
        let token = self.tokens.get(id).ok_or(AuthFailure::Unknown)?;
        if hash_secret(secret) != token.secret_sha256 {
            return Err(AuthFailure::Unknown);
        }
        if token.expiry <= now {
            return Err(AuthFailure::Expired);
        }
        Ok(token)
    }
}
