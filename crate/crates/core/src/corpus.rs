//! Transcript collections indexed by participant and condition.
//!
//! Two on-disk formats are accepted:
//!
//! * a directory of `<participant>__<condition>.txt` files, one per transcript;
//! * a line-delimited record file where every line is a flat JSON object with
//!   the string fields `id`, `participant_id`, `condition_id` and `text`.
//!
//! Text is kept verbatim. Nothing is lowercased or filtered here; the LLM
//! stages work above the token level and the frequency baseline does its own
//! tokenization.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Separator between participant and condition in directory-format file names.
pub const FILENAME_SEPARATOR: &str = "__";

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("no transcripts found under {0}")]
    Empty(PathBuf),
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path} is not valid UTF-8")]
    NotUtf8 { path: PathBuf },
    #[error("{locator}: malformed record: {reason}")]
    Malformed { locator: String, reason: String },
    #[error("{locator}: transcript text is empty")]
    EmptyText { locator: String },
    #[error("duplicate (participant, condition) pair ({participant}, {condition}): {first} and {second}")]
    DuplicatePair {
        participant: String,
        condition: String,
        first: String,
        second: String,
    },
    #[error("duplicate transcript id {id}: {first} and {second}")]
    DuplicateId {
        id: String,
        first: String,
        second: String,
    },
    #[error("unknown condition {condition:?}; known conditions: {}", known.join(", "))]
    UnknownCondition {
        condition: String,
        known: Vec<String>,
    },
    #[error("unknown transcript {0:?}")]
    UnknownTranscript(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CorpusFormat {
    DirectoryOfText,
    LineDelimitedRecords,
}

impl FromStr for CorpusFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "directory-of-text" | "directory" | "dir" => Ok(Self::DirectoryOfText),
            "line-delimited-records" | "records" | "jsonl" => Ok(Self::LineDelimitedRecords),
            other => Err(format!(
                "unknown corpus format {other:?} (expected directory-of-text or line-delimited-records)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transcript {
    pub id: String,
    pub participant_id: String,
    pub condition_id: String,
    pub text: String,
    /// Origin path or `file:line` locator.
    pub source_ref: String,
}

/// Wire shape of one line in the record format.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Record {
    id: String,
    participant_id: String,
    condition_id: String,
    text: String,
}

/// An immutable, validated set of transcripts sorted by id.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Corpus {
    transcripts: Vec<Transcript>,
    conditions: BTreeSet<String>,
}

impl Corpus {
    /// Validates and indexes transcripts. Order of the input does not matter.
    pub fn new(mut transcripts: Vec<Transcript>) -> Result<Self, CorpusError> {
        transcripts.sort_by(|a, b| a.id.cmp(&b.id));

        let mut ids: BTreeMap<&str, &str> = BTreeMap::new();
        let mut pairs: BTreeMap<(&str, &str), &str> = BTreeMap::new();
        for t in &transcripts {
            if t.text.trim().is_empty() {
                return Err(CorpusError::EmptyText {
                    locator: t.source_ref.clone(),
                });
            }
            if let Some(first) = ids.insert(&t.id, &t.source_ref) {
                return Err(CorpusError::DuplicateId {
                    id: t.id.clone(),
                    first: first.to_string(),
                    second: t.source_ref.clone(),
                });
            }
            if let Some(first) = pairs.insert((&t.participant_id, &t.condition_id), &t.source_ref) {
                return Err(CorpusError::DuplicatePair {
                    participant: t.participant_id.clone(),
                    condition: t.condition_id.clone(),
                    first: first.to_string(),
                    second: t.source_ref.clone(),
                });
            }
        }

        let conditions = transcripts.iter().map(|t| t.condition_id.clone()).collect();
        Ok(Self {
            transcripts,
            conditions,
        })
    }

    pub fn transcripts(&self) -> &[Transcript] {
        &self.transcripts
    }

    pub fn conditions(&self) -> impl Iterator<Item = &str> {
        self.conditions.iter().map(String::as_str)
    }

    pub fn participants(&self) -> BTreeSet<&str> {
        self.transcripts
            .iter()
            .map(|t| t.participant_id.as_str())
            .collect()
    }

    pub fn len(&self) -> usize {
        self.transcripts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transcripts.is_empty()
    }

    pub fn get(&self, id: &str) -> Result<&Transcript, CorpusError> {
        self.transcripts
            .binary_search_by(|t| t.id.as_str().cmp(id))
            .map(|i| &self.transcripts[i])
            .map_err(|_| CorpusError::UnknownTranscript(id.to_string()))
    }

    /// Transcripts of one condition, sorted by id.
    pub fn transcripts_for(&self, condition: &str) -> Result<Vec<&Transcript>, CorpusError> {
        if !self.conditions.contains(condition) {
            return Err(CorpusError::UnknownCondition {
                condition: condition.to_string(),
                known: self.conditions.iter().cloned().collect(),
            });
        }
        Ok(self
            .transcripts
            .iter()
            .filter(|t| t.condition_id == condition)
            .collect())
    }

    /// Number of transcripts per condition (M).
    pub fn condition_sizes(&self) -> BTreeMap<&str, usize> {
        let mut sizes = BTreeMap::new();
        for t in &self.transcripts {
            *sizes.entry(t.condition_id.as_str()).or_insert(0) += 1;
        }
        sizes
    }

    /// Writes the corpus in the line-delimited record format.
    pub fn write_records<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for t in &self.transcripts {
            let record = Record {
                id: t.id.clone(),
                participant_id: t.participant_id.clone(),
                condition_id: t.condition_id.clone(),
                text: t.text.clone(),
            };
            serde_json::to_writer(&mut out, &record)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    /// Writes the corpus as a directory of `<participant>__<condition>.txt` files.
    pub fn write_directory(&self, dir: &Path) -> std::io::Result<()> {
        fs::create_dir_all(dir)?;
        for t in &self.transcripts {
            let name = format!(
                "{}{FILENAME_SEPARATOR}{}.txt",
                t.participant_id, t.condition_id
            );
            fs::write(dir.join(name), &t.text)?;
        }
        Ok(())
    }
}

pub fn load_corpus(root: &Path, format: CorpusFormat) -> Result<Corpus, CorpusError> {
    let transcripts = match format {
        CorpusFormat::DirectoryOfText => read_directory(root)?,
        CorpusFormat::LineDelimitedRecords => read_records(root)?,
    };
    if transcripts.is_empty() {
        return Err(CorpusError::Empty(root.to_path_buf()));
    }
    Corpus::new(transcripts)
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CorpusError + '_ {
    move |source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn read_directory(root: &Path) -> Result<Vec<Transcript>, CorpusError> {
    let mut paths = Vec::new();
    for entry in fs::read_dir(root).map_err(io_err(root))? {
        let path = entry.map_err(io_err(root))?.path();
        if path.is_file() && path.extension().is_some_and(|e| e == "txt") {
            paths.push(path);
        }
    }
    paths.sort();

    let mut transcripts = Vec::with_capacity(paths.len());
    for path in paths {
        let locator = path.display().to_string();
        let stem =
            path.file_stem()
                .and_then(|s| s.to_str())
                .ok_or_else(|| CorpusError::Malformed {
                    locator: locator.clone(),
                    reason: "file name is not valid UTF-8".into(),
                })?;
        let (participant, condition) = stem
            .split_once(FILENAME_SEPARATOR)
            .filter(|(p, c)| !p.is_empty() && !c.is_empty() && !c.contains(FILENAME_SEPARATOR))
            .ok_or_else(|| CorpusError::Malformed {
                locator: locator.clone(),
                reason: format!(
                    "file name must be <participant>{FILENAME_SEPARATOR}<condition>.txt"
                ),
            })?;
        let bytes = fs::read(&path).map_err(io_err(&path))?;
        let text =
            String::from_utf8(bytes).map_err(|_| CorpusError::NotUtf8 { path: path.clone() })?;
        transcripts.push(Transcript {
            id: stem.to_string(),
            participant_id: participant.to_string(),
            condition_id: condition.to_string(),
            text,
            source_ref: locator,
        });
    }
    Ok(transcripts)
}

fn read_records(path: &Path) -> Result<Vec<Transcript>, CorpusError> {
    let file = fs::File::open(path).map_err(io_err(path))?;
    let mut transcripts = Vec::new();
    for (idx, line) in BufReader::new(file).split(b'\n').enumerate() {
        let line = line.map_err(io_err(path))?;
        let locator = format!("{}:{}", path.display(), idx + 1);
        let line = String::from_utf8(line).map_err(|_| CorpusError::NotUtf8 {
            path: PathBuf::from(&locator),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let record: Record = serde_json::from_str(&line).map_err(|e| CorpusError::Malformed {
            locator: locator.clone(),
            reason: e.to_string(),
        })?;
        for (field, value) in [
            ("id", &record.id),
            ("participant_id", &record.participant_id),
            ("condition_id", &record.condition_id),
        ] {
            if value.is_empty() {
                return Err(CorpusError::Malformed {
                    locator,
                    reason: format!("field {field} is empty"),
                });
            }
        }
        transcripts.push(Transcript {
            id: record.id,
            participant_id: record.participant_id,
            condition_id: record.condition_id,
            text: record.text,
            source_ref: locator,
        });
    }
    Ok(transcripts)
}
