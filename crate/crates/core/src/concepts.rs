//! Concept vocabularies: the fixed list of short phrases a condition's
//! transcripts are mapped against.
//!
//! Concept identity is the normalized key, never the raw text, because model
//! output casing and spacing drift between runs. Vocabularies are immutable
//! values; every edit returns a new vocabulary with a new version hash.

use std::collections::{BTreeMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::corpus::{Corpus, CorpusError, Transcript};
use crate::llm::{
    complete_parsed, parse_bullet_list, Backend, BulletGroups, CompletionRequest, Decoding,
    GatewayError, PromptTemplate, RetryPolicy, RunLog,
};
use crate::util::{write_atomic, FileError};

/// Upper bound on words per concept phrase.
pub const MAX_PHRASE_WORDS: usize = 8;
pub const DEFAULT_N_TOPICS: usize = 20;

#[derive(Debug, Error)]
pub enum ConceptError {
    #[error("concept phrase is empty")]
    EmptyPhrase,
    #[error("concept phrase {0:?} has more than {MAX_PHRASE_WORDS} words")]
    TooLong(String),
    #[error("duplicate concept key {0:?}")]
    DuplicateKey(String),
    #[error("vocabulary must contain at least one concept")]
    EmptyVocabulary,
    #[error("unknown concept key {0:?}")]
    UnknownKey(String),
    #[error("concept {0:?} is pinned; set unpin on the edit to remove it")]
    PinnedRemoval(String),
    #[error("n must be at least 1")]
    InvalidN,
    #[error("elicitation for {condition} returned {got} distinct concepts, expected {expected}")]
    Underfull {
        condition: String,
        expected: usize,
        got: usize,
        /// What was recovered, for completion by seeding. `None` when nothing usable came back.
        partial: Option<ConceptVocabulary>,
    },
    #[error("elicitation response has no group for condition {0:?}")]
    MissingGroup(String),
    #[error("vocabulary file {path}: version {found} does not match contents ({expected})")]
    VersionMismatch {
        path: String,
        found: String,
        expected: String,
    },
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    File(#[from] FileError),
}

/// Case-folds, collapses whitespace, and strips leading/trailing punctuation.
pub fn normalize_phrase(text: &str) -> String {
    let lowered = text.to_lowercase();
    let collapsed = lowered.split_whitespace().collect::<Vec<_>>().join(" ");
    collapsed
        .trim_matches(|c: char| !c.is_alphanumeric())
        .to_string()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Elicited,
    Seeded,
    Edited,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConceptPhrase {
    text: String,
    key: String,
    pub pinned: bool,
    pub provenance: Provenance,
}

impl ConceptPhrase {
    pub fn new(text: &str, pinned: bool, provenance: Provenance) -> Result<Self, ConceptError> {
        let text = text.split_whitespace().collect::<Vec<_>>().join(" ");
        let key = normalize_phrase(&text);
        if key.is_empty() {
            return Err(ConceptError::EmptyPhrase);
        }
        if text.split_whitespace().count() > MAX_PHRASE_WORDS {
            return Err(ConceptError::TooLong(text));
        }
        Ok(Self {
            text,
            key,
            pinned,
            provenance,
        })
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    pub fn key(&self) -> &str {
        &self.key
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConceptVocabulary {
    condition_id: String,
    concepts: Vec<ConceptPhrase>,
    version: String,
}

/// On-disk shape of a vocabulary.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct VocabularyFile {
    condition_id: String,
    version: String,
    concepts: Vec<ConceptEntryFile>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConceptEntryFile {
    text: String,
    pinned: bool,
    provenance: Provenance,
}

fn version_of(concepts: &[ConceptPhrase]) -> String {
    let list: Vec<(&str, bool)> = concepts
        .iter()
        .map(|c| (c.text.as_str(), c.pinned))
        .collect();
    let encoded = serde_json::to_string(&list).expect("concept list serializes");
    hex::encode(Sha256::digest(encoded.as_bytes()))[..16].to_string()
}

impl ConceptVocabulary {
    pub fn new(
        condition_id: impl Into<String>,
        concepts: Vec<ConceptPhrase>,
    ) -> Result<Self, ConceptError> {
        if concepts.is_empty() {
            return Err(ConceptError::EmptyVocabulary);
        }
        let mut seen = HashSet::new();
        for c in &concepts {
            if !seen.insert(c.key.as_str()) {
                return Err(ConceptError::DuplicateKey(c.key.clone()));
            }
        }
        let version = version_of(&concepts);
        Ok(Self {
            condition_id: condition_id.into(),
            concepts,
            version,
        })
    }

    /// Unpinned, elicited concepts from plain phrases.
    pub fn from_phrases<'a>(
        condition_id: &str,
        phrases: impl IntoIterator<Item = &'a str>,
    ) -> Result<Self, ConceptError> {
        let concepts = phrases
            .into_iter()
            .map(|p| ConceptPhrase::new(p, false, Provenance::Elicited))
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(condition_id, concepts)
    }

    pub fn condition_id(&self) -> &str {
        &self.condition_id
    }

    pub fn version(&self) -> &str {
        &self.version
    }

    pub fn concepts(&self) -> &[ConceptPhrase] {
        &self.concepts
    }

    pub fn len(&self) -> usize {
        self.concepts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.concepts.is_empty()
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.concepts.iter().map(|c| c.key.as_str())
    }

    /// Index of the concept whose normalized key equals `key` (normalized here too).
    pub fn position(&self, key: &str) -> Option<usize> {
        let key = normalize_phrase(key);
        self.concepts.iter().position(|c| c.key == key)
    }

    pub fn get(&self, key: &str) -> Option<&ConceptPhrase> {
        self.position(key).map(|i| &self.concepts[i])
    }

    /// Concept texts as a bullet list, preceded by a newline, for prompt embedding.
    pub fn keyword_list(&self) -> String {
        self.concepts
            .iter()
            .map(|c| format!("\n- {}", c.text))
            .collect()
    }

    pub fn to_json(&self) -> String {
        let file = VocabularyFile {
            condition_id: self.condition_id.clone(),
            version: self.version.clone(),
            concepts: self
                .concepts
                .iter()
                .map(|c| ConceptEntryFile {
                    text: c.text.clone(),
                    pinned: c.pinned,
                    provenance: c.provenance,
                })
                .collect(),
        };
        let mut out = serde_json::to_string_pretty(&file).expect("vocabulary serializes");
        out.push('\n');
        out
    }

    pub fn from_json(json: &str, origin: &str) -> Result<Self, ConceptError> {
        let file: VocabularyFile = serde_json::from_str(json).map_err(|e| FileError::Parse {
            path: origin.to_string(),
            reason: e.to_string(),
        })?;
        let concepts = file
            .concepts
            .iter()
            .map(|c| ConceptPhrase::new(&c.text, c.pinned, c.provenance))
            .collect::<Result<Vec<_>, _>>()?;
        let vocab = Self::new(file.condition_id, concepts)?;
        if vocab.version != file.version {
            return Err(ConceptError::VersionMismatch {
                path: origin.to_string(),
                found: file.version,
                expected: vocab.version,
            });
        }
        Ok(vocab)
    }

    pub fn save(&self, path: &Path) -> Result<(), ConceptError> {
        write_atomic(path, self.to_json().as_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, ConceptError> {
        let json = std::fs::read_to_string(path).map_err(|e| FileError::io(path, e))?;
        Self::from_json(&json, &path.display().to_string())
    }
}

/// Settings shared by elicitation calls.
pub struct ElicitOptions<'a> {
    pub model_id: String,
    pub decoding: Decoding,
    pub policy: RetryPolicy,
    pub log: Option<&'a RunLog>,
    /// Turns one condition's transcripts into the text embedded as `{corpus}`.
    /// Swap this to submit stratified subsets instead of the full corpus.
    pub corpus_section: fn(&str, &[&Transcript]) -> String,
}

impl Default for ElicitOptions<'_> {
    fn default() -> Self {
        Self {
            model_id: "default".into(),
            decoding: Decoding::default(),
            policy: RetryPolicy::default(),
            log: None,
            corpus_section: full_corpus_section,
        }
    }
}

/// `### <condition>` followed by every transcript, separated by blank lines.
pub fn full_corpus_section(condition: &str, transcripts: &[&Transcript]) -> String {
    let mut out = format!("### {condition}\n");
    for t in transcripts {
        out.push('\n');
        out.push_str(t.text.trim());
        out.push('\n');
    }
    out
}

/// The request an elicitation over `conditions` sends.
pub fn elicitation_request(
    corpus: &Corpus,
    conditions: &[&str],
    n: usize,
    template: &PromptTemplate,
    options: &ElicitOptions<'_>,
) -> Result<CompletionRequest, ConceptError> {
    let mut sections = Vec::with_capacity(conditions.len());
    for condition in conditions {
        let transcripts = corpus.transcripts_for(condition)?;
        sections.push((options.corpus_section)(condition, &transcripts));
    }
    Ok(
        CompletionRequest::new(template.clone(), options.model_id.clone(), options.decoding)
            .var("device_name", conditions.join(", "))
            .var("n_topics", n.to_string())
            .var("corpus", sections.join("\n")),
    )
}

/// Distinct, valid phrases of one group, in order. Invalid phrases are skipped.
fn distinct_phrases(items: &[String]) -> Vec<String> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for item in items {
        match ConceptPhrase::new(item, false, Provenance::Elicited) {
            Ok(p) => {
                if seen.insert(p.key.clone()) {
                    out.push(p.text);
                } else {
                    tracing::warn!(phrase = %item, "collapsed duplicate elicited concept");
                }
            }
            Err(e) => tracing::warn!(phrase = %item, error = %e, "skipped elicited phrase"),
        }
    }
    out
}

fn group_for<'g>(groups: &'g BulletGroups, condition: &str, single: bool) -> Option<&'g [String]> {
    groups
        .get(condition)
        .or_else(|| if single { groups.sole() } else { None })
}

fn pick_groups(
    groups: &BulletGroups,
    conditions: &[&str],
    n: usize,
) -> Result<BTreeMap<String, Vec<String>>, GatewayError> {
    let single = conditions.len() == 1;
    let mut picked = BTreeMap::new();
    for condition in conditions {
        let items = group_for(groups, condition, single).ok_or_else(|| {
            GatewayError::Format(format!("no '### {condition}' group in response"))
        })?;
        let mut phrases = distinct_phrases(items);
        if phrases.len() < n {
            return Err(GatewayError::Underfull {
                group: condition.to_string(),
                expected: n,
                got: phrases.len(),
                partial: groups.clone(),
            });
        }
        phrases.truncate(n);
        picked.insert(condition.to_string(), phrases);
    }
    Ok(picked)
}

fn build(condition: &str, phrases: &[String]) -> Result<ConceptVocabulary, ConceptError> {
    ConceptVocabulary::from_phrases(condition, phrases.iter().map(String::as_str))
}

/// Elicits vocabularies for several conditions with one grouped call.
pub fn elicit_grouped(
    corpus: &Corpus,
    conditions: &[&str],
    n: usize,
    template: &PromptTemplate,
    backend: &dyn Backend,
    options: &ElicitOptions<'_>,
) -> Result<BTreeMap<String, ConceptVocabulary>, ConceptError> {
    if n == 0 {
        return Err(ConceptError::InvalidN);
    }
    let request = elicitation_request(corpus, conditions, n, template, options)?.render()?;
    let parsed = complete_parsed(&request, backend, options.log, &options.policy, |raw| {
        pick_groups(&parse_bullet_list(raw, 1)?, conditions, n)
    });
    match parsed {
        Ok(picked) => picked
            .iter()
            .map(|(c, phrases)| Ok((c.clone(), build(c, phrases)?)))
            .collect(),
        Err(GatewayError::Underfull { group, partial, .. }) => {
            let single = conditions.len() == 1;
            let phrases = group_for(&partial, &group, single)
                .map(distinct_phrases)
                .unwrap_or_default();
            Err(ConceptError::Underfull {
                expected: n,
                got: phrases.len(),
                partial: build(&group, &phrases).ok(),
                condition: group,
            })
        }
        Err(GatewayError::Format(msg)) if msg.starts_with("no '### ") => {
            let missing = conditions
                .iter()
                .find(|c| msg.contains(&format!("'### {c}'")))
                .map_or_else(|| msg.clone(), |c| c.to_string());
            Err(ConceptError::MissingGroup(missing))
        }
        Err(e) => Err(e.into()),
    }
}

/// Elicits exactly `n` concepts for one condition.
pub fn elicit_vocabulary(
    corpus: &Corpus,
    condition: &str,
    n: usize,
    template: &PromptTemplate,
    backend: &dyn Backend,
    options: &ElicitOptions<'_>,
) -> Result<ConceptVocabulary, ConceptError> {
    let mut out = elicit_grouped(corpus, &[condition], n, template, backend, options)?;
    Ok(out
        .remove(condition)
        .expect("requested condition is present"))
}

/// Folds a fresh elicitation into an existing vocabulary. Pinned concepts
/// always survive, in their existing order; fresh concepts fill the rest up
/// to the fresh vocabulary's size.
pub fn merge_reelicited(
    existing: &ConceptVocabulary,
    fresh: &ConceptVocabulary,
) -> Result<ConceptVocabulary, ConceptError> {
    let pinned: Vec<ConceptPhrase> = existing
        .concepts
        .iter()
        .filter(|c| c.pinned)
        .cloned()
        .collect();
    if pinned.is_empty() {
        return Ok(fresh.clone());
    }
    let target = fresh.len().max(pinned.len());
    let mut seen: HashSet<String> = pinned.iter().map(|c| c.key.clone()).collect();
    let mut concepts = pinned;
    for c in &fresh.concepts {
        if concepts.len() >= target {
            break;
        }
        if seen.insert(c.key.clone()) {
            concepts.push(c.clone());
        }
    }
    ConceptVocabulary::new(existing.condition_id.clone(), concepts)
}

/// Appends analyst phrases. Phrases whose key already exists, or which are
/// not valid concept phrases, are skipped and reported in the notices.
pub fn seed_concepts(
    vocab: &ConceptVocabulary,
    phrases: &[&str],
    pin: bool,
) -> (ConceptVocabulary, Vec<String>) {
    let mut concepts = vocab.concepts.clone();
    let mut notices = Vec::new();
    for phrase in phrases {
        match ConceptPhrase::new(phrase, pin, Provenance::Seeded) {
            Ok(p) if concepts.iter().any(|c| c.key == p.key) => {
                notices.push(format!(
                    "skipped {phrase:?}: concept {:?} already present",
                    p.key
                ));
            }
            Ok(p) => concepts.push(p),
            Err(e) => notices.push(format!("skipped {phrase:?}: {e}")),
        }
    }
    let out = ConceptVocabulary::new(vocab.condition_id.clone(), concepts)
        .expect("seeding keeps keys distinct and the list non-empty");
    (out, notices)
}

pub fn set_pinned(
    vocab: &ConceptVocabulary,
    key: &str,
    pinned: bool,
) -> Result<ConceptVocabulary, ConceptError> {
    let idx = vocab
        .position(key)
        .ok_or_else(|| ConceptError::UnknownKey(key.to_string()))?;
    let mut concepts = vocab.concepts.clone();
    concepts[idx].pinned = pinned;
    ConceptVocabulary::new(vocab.condition_id.clone(), concepts)
}

/// One split or merge step: drop `remove`, insert `add` where the first
/// removed concept was (or at the end when nothing is removed).
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct VocabEdit {
    #[serde(default)]
    pub remove: Vec<String>,
    #[serde(default)]
    pub add: Vec<String>,
    /// Allows removing pinned concepts.
    #[serde(default)]
    pub unpin: bool,
}

/// Applies all edits or none.
pub fn split_or_merge(
    vocab: &ConceptVocabulary,
    edits: &[VocabEdit],
) -> Result<ConceptVocabulary, ConceptError> {
    if edits.is_empty() {
        return Ok(vocab.clone());
    }
    let mut concepts = vocab.concepts.clone();
    for edit in edits {
        let mut insert_at = None;
        for key in &edit.remove {
            let key = normalize_phrase(key);
            let idx = concepts
                .iter()
                .position(|c| c.key == key)
                .ok_or_else(|| ConceptError::UnknownKey(key.clone()))?;
            if concepts[idx].pinned && !edit.unpin {
                return Err(ConceptError::PinnedRemoval(key));
            }
            concepts.remove(idx);
            insert_at = Some(insert_at.map_or(idx, |at: usize| at.min(idx)));
        }
        let start = insert_at.unwrap_or(concepts.len());
        for (at, phrase) in (start..).zip(&edit.add) {
            let p = ConceptPhrase::new(phrase, false, Provenance::Edited)?;
            if concepts.iter().any(|c| c.key == p.key) {
                return Err(ConceptError::DuplicateKey(p.key));
            }
            concepts.insert(at, p);
        }
    }
    ConceptVocabulary::new(vocab.condition_id.clone(), concepts)
}
