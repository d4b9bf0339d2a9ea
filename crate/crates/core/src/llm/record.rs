use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use chrono::{SecondsFormat, Utc};
use serde::{Deserialize, Serialize};

use super::{BackendKind, FixtureEntry, GatewayError};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompletionRecord {
    pub digest: String,
    pub raw_response: String,
    pub backend: BackendKind,
    pub model_id: String,
    pub timestamp: String,
}

impl CompletionRecord {
    pub fn new(digest: &str, raw: &str, backend: BackendKind, model_id: &str) -> Self {
        Self {
            digest: digest.to_string(),
            raw_response: raw.to_string(),
            backend,
            model_id: model_id.to_string(),
            timestamp: Utc::now().to_rfc3339_opts(SecondsFormat::Millis, true),
        }
    }

    pub fn as_fixture(&self) -> FixtureEntry {
        FixtureEntry {
            digest: self.digest.clone(),
            raw_response: self.raw_response.clone(),
        }
    }
}

/// Append-only line-delimited log of completion records. Writes from
/// concurrent workers are serialized through one handle.
#[derive(Debug)]
pub struct RunLog {
    path: PathBuf,
    file: Mutex<File>,
}

impl RunLog {
    pub fn open(path: &Path) -> Result<Self, GatewayError> {
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        Ok(Self {
            path: path.to_path_buf(),
            file: Mutex::new(file),
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn append(&self, record: &CompletionRecord) -> Result<(), GatewayError> {
        let mut line = serde_json::to_string(record).expect("record serializes");
        line.push('\n');
        let mut file = self.file.lock().expect("run log writer poisoned");
        file.write_all(line.as_bytes())?;
        file.flush()?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Vec<CompletionRecord>, GatewayError> {
        let file = File::open(path)?;
        BufReader::new(file)
            .lines()
            .enumerate()
            .filter(|(_, l)| l.as_ref().map_or(true, |l| !l.trim().is_empty()))
            .map(|(idx, line)| {
                serde_json::from_str(&line?).map_err(|e| {
                    GatewayError::Format(format!("{}:{}: {e}", path.display(), idx + 1))
                })
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn appends_and_reads_back() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("log/completions.jsonl");
        let log = RunLog::open(&path).unwrap();
        let a = CompletionRecord::new("d1", "- x", BackendKind::Mock, "m");
        let b = CompletionRecord::new("d2", "line\nline", BackendKind::Fixture, "m");
        log.append(&a).unwrap();
        log.append(&b).unwrap();
        assert_eq!(RunLog::read(&path).unwrap(), vec![a, b]);
    }
}
