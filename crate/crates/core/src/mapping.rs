//! Assignment tables: which transcripts mention which concepts.
//!
//! A table is a dense transcript × concept matrix. Every cell carries its
//! provenance (model judgment or human correction) and every correction is
//! journaled, so the original model output can always be recovered and the
//! current state replayed from it.
//!
//! On disk a table is a CSV file plus a JSON sidecar next to it
//! (`insta.csv` / `insta.meta.json`). The CSV header is
//! `transcript_id,<concept_key>,…` in vocabulary order and cells are `0`, `1`,
//! `0*` or `1*` (asterisk = human provenance). Rows whose mapping failed are
//! written with `?` in every cell.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::concepts::{normalize_phrase, ConceptVocabulary};
use crate::corpus::{Corpus, CorpusError, Transcript};
use crate::llm::{
    complete_parsed, complete_rendered, parse_line_list, parse_score_list, Backend,
    CompletionRequest, Decoding, GatewayError, PromptTemplate, RenderedRequest, RetryPolicy,
    RunLog,
};
use crate::util::{write_atomic, FileError};

pub const TABLE_SCHEMA_VERSION: u32 = 1;
pub const DEFAULT_TAU: f64 = 0.5;
pub const DEFAULT_MAX_ITEMS: usize = 20;
const INCOMPLETE_CELL: &str = "?";

#[derive(Debug, Error)]
pub enum MappingError {
    #[error("tau must lie in (0, 1], got {0}")]
    InvalidTau(f64),
    #[error("vocabulary is empty")]
    EmptyVocabulary,
    #[error("table was built against vocabulary {table_version} but the current vocabulary is {current_version}; re-run mapping")]
    Stale {
        table_version: String,
        current_version: String,
    },
    #[error("no row for transcript {0:?}")]
    UnknownRow(String),
    #[error("no column for concept {0:?}")]
    UnknownConcept(String),
    #[error("row {0:?} is incomplete; re-run mapping before correcting it")]
    IncompleteRow(String),
    #[error("table schema error: {0}")]
    Schema(String),
    #[error("table schema version {found} is newer than supported version {supported}; migrate the file or upgrade")]
    Migration { found: u32, supported: u32 },
    #[error("journal replay failed at entry {seq}: {reason}")]
    Replay { seq: u64, reason: String },
    #[error(transparent)]
    File(#[from] FileError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CellProvenance {
    Model,
    Human,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MappingMode {
    #[default]
    Binary,
    Soft,
}

impl std::str::FromStr for MappingMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "binary" => Ok(Self::Binary),
            "soft" => Ok(Self::Soft),
            other => Err(format!(
                "unknown mapping mode {other:?} (expected binary or soft)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssignmentCell {
    pub value: bool,
    pub soft_score: Option<f64>,
    pub provenance: CellProvenance,
    pub note: Option<String>,
}

impl AssignmentCell {
    pub fn model(value: bool) -> Self {
        Self {
            value,
            soft_score: None,
            provenance: CellProvenance::Model,
            note: None,
        }
    }

    pub fn scored(score: f64, tau: f64) -> Self {
        Self {
            value: score >= tau,
            soft_score: Some(score),
            provenance: CellProvenance::Model,
            note: None,
        }
    }

    fn code(&self) -> &'static str {
        match (self.value, self.provenance) {
            (false, CellProvenance::Model) => "0",
            (true, CellProvenance::Model) => "1",
            (false, CellProvenance::Human) => "0*",
            (true, CellProvenance::Human) => "1*",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssignmentRow {
    pub transcript_id: String,
    pub participant_id: String,
    /// One cell per vocabulary concept, in vocabulary order.
    pub cells: Vec<AssignmentCell>,
    /// Why mapping failed for this transcript. Cells of incomplete rows carry no judgment.
    pub incomplete: Option<String>,
}

impl AssignmentRow {
    pub fn is_complete(&self) -> bool {
        self.incomplete.is_none()
    }
}

/// Value of a cell before a correction, kept so corrections can be undone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JournalEntry {
    pub seq: u64,
    pub transcript_id: String,
    pub concept_key: String,
    pub new_value: bool,
    pub note: String,
    pub previous: AssignmentCell,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AssignmentTable {
    pub condition_id: String,
    pub vocabulary_version: String,
    pub run_id: String,
    pub tau: f64,
    pub mode: MappingMode,
    concept_keys: Vec<String>,
    concept_texts: Vec<String>,
    rows: Vec<AssignmentRow>,
    journal: Vec<JournalEntry>,
    /// Current vocabulary version, set when it differs from `vocabulary_version`.
    stale_against: Option<String>,
}

pub fn validate_tau(tau: f64) -> Result<f64, MappingError> {
    if tau > 0.0 && tau <= 1.0 {
        Ok(tau)
    } else {
        Err(MappingError::InvalidTau(tau))
    }
}

/// Thresholds graded scores: present iff score ≥ tau.
pub fn binarize(scores: &[f64], tau: f64) -> Vec<bool> {
    scores.iter().map(|&s| s >= tau).collect()
}

impl AssignmentTable {
    /// Assembles a table; rows may arrive in any order and are sorted by transcript id.
    pub fn new(
        vocab: &ConceptVocabulary,
        run_id: impl Into<String>,
        tau: f64,
        mode: MappingMode,
        mut rows: Vec<AssignmentRow>,
    ) -> Result<Self, MappingError> {
        validate_tau(tau)?;
        let width = vocab.len();
        for row in &rows {
            if row.cells.len() != width {
                return Err(MappingError::Schema(format!(
                    "row {} has {} cells, vocabulary has {width} concepts",
                    row.transcript_id,
                    row.cells.len()
                )));
            }
        }
        rows.sort_by(|a, b| a.transcript_id.cmp(&b.transcript_id));
        if let Some(w) = rows
            .windows(2)
            .find(|w| w[0].transcript_id == w[1].transcript_id)
        {
            return Err(MappingError::Schema(format!(
                "duplicate row {}",
                w[0].transcript_id
            )));
        }
        Ok(Self {
            condition_id: vocab.condition_id().to_string(),
            vocabulary_version: vocab.version().to_string(),
            run_id: run_id.into(),
            tau,
            mode,
            concept_keys: vocab.keys().map(str::to_string).collect(),
            concept_texts: vocab
                .concepts()
                .iter()
                .map(|c| c.text().to_string())
                .collect(),
            rows,
            journal: Vec::new(),
            stale_against: None,
        })
    }

    pub fn concept_keys(&self) -> &[String] {
        &self.concept_keys
    }

    pub fn concept_texts(&self) -> &[String] {
        &self.concept_texts
    }

    pub fn rows(&self) -> &[AssignmentRow] {
        &self.rows
    }

    pub fn journal(&self) -> &[JournalEntry] {
        &self.journal
    }

    pub fn is_stale(&self) -> bool {
        self.stale_against.is_some()
    }

    pub fn is_complete(&self) -> bool {
        self.rows.iter().all(AssignmentRow::is_complete)
    }

    pub fn incomplete_rows(&self) -> Vec<(&str, &str)> {
        self.rows
            .iter()
            .filter_map(|r| {
                r.incomplete
                    .as_deref()
                    .map(|why| (r.transcript_id.as_str(), why))
            })
            .collect()
    }

    /// Flags the table stale when `current` is not the vocabulary it was built from.
    pub fn check_against(&mut self, current: &ConceptVocabulary) -> bool {
        self.stale_against =
            (current.version() != self.vocabulary_version).then(|| current.version().to_string());
        self.is_stale()
    }

    pub fn column(&self, concept_key: &str) -> Option<usize> {
        let key = normalize_phrase(concept_key);
        self.concept_keys.iter().position(|k| *k == key)
    }

    pub fn row(&self, transcript_id: &str) -> Option<&AssignmentRow> {
        self.rows
            .binary_search_by(|r| r.transcript_id.as_str().cmp(transcript_id))
            .ok()
            .map(|i| &self.rows[i])
    }

    pub fn cell(&self, transcript_id: &str, concept_key: &str) -> Option<&AssignmentCell> {
        let col = self.column(concept_key)?;
        self.row(transcript_id).map(|r| &r.cells[col])
    }

    /// Participants whose row marks the concept present, in row order.
    pub fn participants_with(&self, concept_key: &str) -> Vec<&str> {
        let Some(col) = self.column(concept_key) else {
            return Vec::new();
        };
        self.rows
            .iter()
            .filter(|r| r.is_complete() && r.cells[col].value)
            .map(|r| r.participant_id.as_str())
            .collect()
    }

    fn locate(
        &self,
        transcript_id: &str,
        concept_key: &str,
    ) -> Result<(usize, usize), MappingError> {
        let row = self
            .rows
            .binary_search_by(|r| r.transcript_id.as_str().cmp(transcript_id))
            .map_err(|_| MappingError::UnknownRow(transcript_id.to_string()))?;
        let col = self
            .column(concept_key)
            .ok_or_else(|| MappingError::UnknownConcept(concept_key.to_string()))?;
        Ok((row, col))
    }

    /// Records a human judgment for one cell and journals it.
    pub fn apply_correction(
        &self,
        transcript_id: &str,
        concept_key: &str,
        new_value: bool,
        note: &str,
    ) -> Result<AssignmentTable, MappingError> {
        if let Some(current) = &self.stale_against {
            return Err(MappingError::Stale {
                table_version: self.vocabulary_version.clone(),
                current_version: current.clone(),
            });
        }
        let (row, col) = self.locate(transcript_id, concept_key)?;
        if !self.rows[row].is_complete() {
            return Err(MappingError::IncompleteRow(transcript_id.to_string()));
        }
        let mut next = self.clone();
        let cell = &mut next.rows[row].cells[col];
        let entry = JournalEntry {
            seq: self.journal.last().map_or(1, |e| e.seq + 1),
            transcript_id: transcript_id.to_string(),
            concept_key: self.concept_keys[col].clone(),
            new_value,
            note: note.to_string(),
            previous: cell.clone(),
        };
        *cell = AssignmentCell {
            value: new_value,
            soft_score: None,
            provenance: CellProvenance::Human,
            note: (!note.is_empty()).then(|| note.to_string()),
        };
        next.journal.push(entry);
        Ok(next)
    }

    /// The table as the model produced it, with every correction undone.
    pub fn original(&self) -> AssignmentTable {
        let mut table = self.clone();
        for entry in self.journal.iter().rev() {
            let (row, col) = table
                .locate(&entry.transcript_id, &entry.concept_key)
                .expect("journal entries reference existing cells");
            table.rows[row].cells[col] = entry.previous.clone();
        }
        table.journal.clear();
        table
    }

    /// Applies `journal` in order on top of this table.
    pub fn replay(&self, journal: &[JournalEntry]) -> Result<AssignmentTable, MappingError> {
        let mut table = self.clone();
        for entry in journal {
            let current = table
                .cell(&entry.transcript_id, &entry.concept_key)
                .ok_or_else(|| MappingError::Replay {
                    seq: entry.seq,
                    reason: format!("no cell ({}, {})", entry.transcript_id, entry.concept_key),
                })?;
            if *current != entry.previous {
                return Err(MappingError::Replay {
                    seq: entry.seq,
                    reason: "cell does not match the journaled previous value".into(),
                });
            }
            table = table
                .apply_correction(
                    &entry.transcript_id,
                    &entry.concept_key,
                    entry.new_value,
                    &entry.note,
                )
                .map_err(|e| MappingError::Replay {
                    seq: entry.seq,
                    reason: e.to_string(),
                })?;
        }
        Ok(table)
    }

    pub fn to_csv(&self) -> String {
        let mut writer = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        let mut header = vec!["transcript_id"];
        header.extend(self.concept_keys.iter().map(String::as_str));
        writer.write_record(&header).expect("in-memory write");
        for row in &self.rows {
            let mut record = vec![row.transcript_id.as_str()];
            if row.is_complete() {
                record.extend(row.cells.iter().map(|c| -> &str { c.code() }));
            } else {
                record.extend(std::iter::repeat_n(INCOMPLETE_CELL, row.cells.len()));
            }
            writer.write_record(&record).expect("in-memory write");
        }
        String::from_utf8(writer.into_inner().expect("in-memory flush")).expect("csv is utf-8")
    }

    fn sidecar(&self) -> Sidecar {
        let mut notes: BTreeMap<String, BTreeMap<String, String>> = BTreeMap::new();
        let mut soft_scores = BTreeMap::new();
        let mut participants = BTreeMap::new();
        let mut incomplete = BTreeMap::new();
        for row in &self.rows {
            participants.insert(row.transcript_id.clone(), row.participant_id.clone());
            if let Some(why) = &row.incomplete {
                incomplete.insert(row.transcript_id.clone(), why.clone());
            }
            for (key, cell) in self.concept_keys.iter().zip(&row.cells) {
                if let Some(note) = &cell.note {
                    notes
                        .entry(row.transcript_id.clone())
                        .or_default()
                        .insert(key.clone(), note.clone());
                }
            }
            if row.cells.iter().any(|c| c.soft_score.is_some()) {
                soft_scores.insert(
                    row.transcript_id.clone(),
                    row.cells.iter().map(|c| c.soft_score).collect(),
                );
            }
        }
        Sidecar {
            schema_version: TABLE_SCHEMA_VERSION,
            condition_id: self.condition_id.clone(),
            vocabulary_version: self.vocabulary_version.clone(),
            run_id: self.run_id.clone(),
            tau: self.tau,
            mode: self.mode,
            concept_keys: self.concept_keys.clone(),
            concept_texts: self.concept_texts.clone(),
            participants,
            incomplete,
            notes,
            soft_scores,
            journal: self.journal.clone(),
        }
    }

    pub fn save(&self, csv_path: &Path) -> Result<(), MappingError> {
        let mut meta = serde_json::to_string_pretty(&self.sidecar()).expect("sidecar serializes");
        meta.push('\n');
        write_atomic(&sidecar_path(csv_path), meta.as_bytes())?;
        write_atomic(csv_path, self.to_csv().as_bytes())?;
        Ok(())
    }

    pub fn load(csv_path: &Path) -> Result<Self, MappingError> {
        let meta_path = sidecar_path(csv_path);
        let meta = std::fs::read_to_string(&meta_path).map_err(|e| FileError::io(&meta_path, e))?;
        let csv_text = std::fs::read_to_string(csv_path).map_err(|e| FileError::io(csv_path, e))?;
        Self::from_parts(&csv_text, &meta)
    }

    pub fn from_parts(csv_text: &str, meta_json: &str) -> Result<Self, MappingError> {
        let probe: serde_json::Value = serde_json::from_str(meta_json)
            .map_err(|e| MappingError::Schema(format!("sidecar: {e}")))?;
        let found = probe
            .get("schema_version")
            .and_then(serde_json::Value::as_u64)
            .ok_or_else(|| MappingError::Schema("sidecar lacks schema_version".into()))?
            as u32;
        if found > TABLE_SCHEMA_VERSION {
            return Err(MappingError::Migration {
                found,
                supported: TABLE_SCHEMA_VERSION,
            });
        }
        let meta: Sidecar = serde_json::from_value(probe)
            .map_err(|e| MappingError::Schema(format!("sidecar: {e}")))?;
        validate_tau(meta.tau)?;
        if meta.concept_texts.len() != meta.concept_keys.len() {
            return Err(MappingError::Schema(
                "sidecar concept_keys and concept_texts differ in length".into(),
            ));
        }

        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .from_reader(csv_text.as_bytes());
        let header = reader
            .headers()
            .map_err(|e| MappingError::Schema(format!("header: {e}")))?
            .clone();
        let mut columns = header.iter();
        if columns.next() != Some("transcript_id") {
            return Err(MappingError::Schema(
                "first column must be transcript_id".into(),
            ));
        }
        let columns: Vec<&str> = columns.collect();
        if let Some(extra) = columns
            .iter()
            .find(|c| !meta.concept_keys.iter().any(|k| k == *c))
        {
            return Err(MappingError::Schema(format!("unknown column {extra:?}")));
        }
        if columns != meta.concept_keys {
            return Err(MappingError::Schema(
                "columns do not match the sidecar's concept_keys (missing or reordered)".into(),
            ));
        }

        let mut rows = Vec::new();
        for (idx, record) in reader.records().enumerate() {
            let record =
                record.map_err(|e| MappingError::Schema(format!("row {}: {e}", idx + 1)))?;
            let mut fields = record.iter();
            let tid = fields.next().unwrap_or_default().to_string();
            let participant_id = meta.participants.get(&tid).cloned().ok_or_else(|| {
                MappingError::Schema(format!("sidecar has no participant for row {tid:?}"))
            })?;
            let incomplete = meta.incomplete.get(&tid).cloned();
            let scores = meta.soft_scores.get(&tid);
            let mut cells = Vec::with_capacity(columns.len());
            for (col, code) in fields.enumerate() {
                let key = &meta.concept_keys[col];
                let mut cell = match (code, incomplete.is_some()) {
                    (INCOMPLETE_CELL, true) => AssignmentCell::model(false),
                    ("0", false) => AssignmentCell::model(false),
                    ("1", false) => AssignmentCell::model(true),
                    ("0*", false) => AssignmentCell {
                        provenance: CellProvenance::Human,
                        ..AssignmentCell::model(false)
                    },
                    ("1*", false) => AssignmentCell {
                        provenance: CellProvenance::Human,
                        ..AssignmentCell::model(true)
                    },
                    (other, _) => {
                        return Err(MappingError::Schema(format!(
                            "row {tid:?} column {key:?}: invalid cell {other:?}"
                        )))
                    }
                };
                cell.soft_score = scores.and_then(|s| s.get(col).copied().flatten());
                if let Some(score) = cell.soft_score {
                    if cell.provenance == CellProvenance::Human {
                        return Err(MappingError::Schema(format!(
                            "row {tid:?} column {key:?}: human cell carries a soft score"
                        )));
                    }
                    if cell.value != (score >= meta.tau) {
                        return Err(MappingError::Schema(format!(
                            "row {tid:?} column {key:?}: value disagrees with soft score at tau {}",
                            meta.tau
                        )));
                    }
                }
                cell.note = meta.notes.get(&tid).and_then(|n| n.get(key)).cloned();
                cells.push(cell);
            }
            if cells.len() != columns.len() {
                return Err(MappingError::Schema(format!(
                    "row {tid:?} has {} cells",
                    cells.len()
                )));
            }
            rows.push(AssignmentRow {
                transcript_id: tid,
                participant_id,
                cells,
                incomplete,
            });
        }
        if rows.len() != meta.participants.len() {
            return Err(MappingError::Schema(
                "sidecar lists rows missing from the CSV".into(),
            ));
        }

        let table = Self {
            condition_id: meta.condition_id,
            vocabulary_version: meta.vocabulary_version,
            run_id: meta.run_id,
            tau: meta.tau,
            mode: meta.mode,
            concept_keys: meta.concept_keys,
            concept_texts: meta.concept_texts,
            rows,
            journal: meta.journal,
            stale_against: None,
        };
        if table
            .rows
            .windows(2)
            .any(|w| w[0].transcript_id >= w[1].transcript_id)
        {
            return Err(MappingError::Schema(
                "rows must be unique and sorted by transcript_id".into(),
            ));
        }
        Ok(table)
    }
}

pub fn sidecar_path(csv_path: &Path) -> PathBuf {
    csv_path.with_extension("meta.json")
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Sidecar {
    schema_version: u32,
    condition_id: String,
    vocabulary_version: String,
    run_id: String,
    tau: f64,
    mode: MappingMode,
    concept_keys: Vec<String>,
    concept_texts: Vec<String>,
    participants: BTreeMap<String, String>,
    #[serde(default)]
    incomplete: BTreeMap<String, String>,
    #[serde(default)]
    notes: BTreeMap<String, BTreeMap<String, String>>,
    #[serde(default)]
    soft_scores: BTreeMap<String, Vec<Option<f64>>>,
    #[serde(default)]
    journal: Vec<JournalEntry>,
}

pub struct MapOptions<'a> {
    pub model_id: String,
    pub decoding: Decoding,
    pub policy: RetryPolicy,
    pub log: Option<&'a RunLog>,
    pub max_items: usize,
}

impl Default for MapOptions<'_> {
    fn default() -> Self {
        Self {
            model_id: "default".into(),
            decoding: Decoding::default(),
            policy: RetryPolicy::default(),
            log: None,
            max_items: DEFAULT_MAX_ITEMS,
        }
    }
}

/// The request mapping one transcript sends.
pub fn mapping_request(
    transcript: &Transcript,
    vocab: &ConceptVocabulary,
    template: &PromptTemplate,
    options: &MapOptions<'_>,
) -> Result<RenderedRequest, GatewayError> {
    CompletionRequest::new(template.clone(), options.model_id.clone(), options.decoding)
        .var("device_name", vocab.condition_id())
        .var("keyword_list", vocab.keyword_list())
        .var("corpus", transcript.text.trim())
        .render()
}

/// Judges one transcript against the vocabulary.
pub fn map_transcript(
    transcript: &Transcript,
    vocab: &ConceptVocabulary,
    template: &PromptTemplate,
    backend: &dyn Backend,
    mode: MappingMode,
    tau: f64,
    options: &MapOptions<'_>,
) -> Result<AssignmentRow, MappingError> {
    validate_tau(tau)?;
    if vocab.is_empty() {
        return Err(MappingError::EmptyVocabulary);
    }
    let request = mapping_request(transcript, vocab, template, options)?;
    let cells = match mode {
        MappingMode::Binary => {
            let (raw, _) = complete_rendered(&request, backend, options.log, &options.policy)?;
            let parsed = parse_line_list(&raw, vocab, options.max_items);
            let mut cells = vec![AssignmentCell::model(false); vocab.len()];
            for idx in parsed.matched {
                cells[idx].value = true;
            }
            cells
        }
        MappingMode::Soft => {
            let parsed = complete_parsed(&request, backend, options.log, &options.policy, |raw| {
                parse_score_list(raw, vocab)
            })?;
            let missing = parsed.scores.iter().filter(|s| s.is_none()).count();
            if missing > 0 {
                tracing::warn!(transcript = %transcript.id, missing, "unscored concepts treated as 0");
            }
            parsed
                .scores
                .iter()
                .map(|s| AssignmentCell::scored(s.unwrap_or(0.0), tau))
                .collect()
        }
    };
    Ok(AssignmentRow {
        transcript_id: transcript.id.clone(),
        participant_id: transcript.participant_id.clone(),
        cells,
        incomplete: None,
    })
}

/// Maps every transcript of `condition`. Transcripts are judged concurrently;
/// failures become incomplete rows rather than zeros.
#[allow(clippy::too_many_arguments)]
pub fn map_condition(
    corpus: &Corpus,
    condition: &str,
    vocab: &ConceptVocabulary,
    template: &PromptTemplate,
    backend: &dyn Backend,
    mode: MappingMode,
    tau: f64,
    run_id: &str,
    options: &MapOptions<'_>,
) -> Result<AssignmentTable, MappingError> {
    validate_tau(tau)?;
    let transcripts = corpus.transcripts_for(condition)?;
    let rows: Vec<AssignmentRow> = transcripts
        .par_iter()
        .map(
            |t| match map_transcript(t, vocab, template, backend, mode, tau, options) {
                Ok(row) => row,
                Err(e) => {
                    tracing::error!(transcript = %t.id, error = %e, "mapping failed");
                    AssignmentRow {
                        transcript_id: t.id.clone(),
                        participant_id: t.participant_id.clone(),
                        cells: vec![AssignmentCell::model(false); vocab.len()],
                        incomplete: Some(e.to_string()),
                    }
                }
            },
        )
        .collect();
    AssignmentTable::new(vocab, run_id, tau, mode, rows)
}
