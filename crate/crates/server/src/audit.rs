use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::ServerError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "decision", content = "reason", rename_all = "snake_case")]
pub enum Decision {
    Served,
    Refused(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditRecord {
    pub timestamp: String,
    /// `anonymous` when no token was presented.
    pub token_id: String,
    pub endpoint: String,
    pub query_digest: String,
    pub row_count: usize,
    #[serde(flatten)]
    pub decision: Decision,
}

/// Append-only JSONL writer; one lock serializes all appends.
pub struct AuditLog {
    path: PathBuf,
    file: Mutex<(File, usize)>,
}

impl AuditLog {
    pub fn open(path: &Path) -> Result<Self, ServerError> {
        let io = |source| ServerError::Io { path: path.into(), source };
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).map_err(io)?;
        }
        let file = OpenOptions::new().create(true).append(true).open(path).map_err(io)?;
        Ok(Self { path: path.into(), file: Mutex::new((file, 0)) })
    }

    pub fn append(&self, record: &AuditRecord) -> Result<(), ServerError> {
        let mut line = serde_json::to_string(record).expect("audit record serializes");
        line.push('\n');
        let mut guard = self.file.lock().expect("audit lock poisoned");
        guard.0.write_all(line.as_bytes()).map_err(|source| ServerError::Io { path: self.path.clone(), source })?;
        guard.1 += 1;
        Ok(())
    }

    /// Records appended by this process.
    pub fn written(&self) -> usize {
        self.file.lock().expect("audit lock poisoned").1
    }

    pub fn path(&self) -> &Path {
        &self.path
    }
}

pub fn read_audit(path: &Path) -> Result<Vec<AuditRecord>, ServerError> {
    let f = File::open(path).map_err(|source| ServerError::Io { path: path.into(), source })?;
    BufReader::new(f)
        .lines()
        .map(|l| {
            let l = l.map_err(|source| ServerError::Io { path: path.into(), source })?;
            serde_json::from_str(&l).map_err(|e| ServerError::Config(format!("audit line: {e}")))
        })
        .collect()
}
