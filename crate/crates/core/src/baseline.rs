//! Frequency word-cloud baseline: tokenize, drop stop-words, count, and size
//! the top tokens with the same layout pipeline as concept clouds.

use std::collections::{BTreeMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::Transcript;
use crate::layout::{font_sizes, CloudEntry, FontRange, LayoutError, WeightedItem};
use crate::util::FileError;

/// Standard English stop-word list (179 words), one per line.
pub const BUNDLED_STOPWORDS: &str = include_str!("../data/stopwords_en.txt");

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StopWords {
    words: HashSet<String>,
    version: String,
}

impl StopWords {
    /// Parses one word per line; blank lines and `#` comments are skipped.
    pub fn parse(text: &str) -> Self {
        let words: HashSet<String> = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(str::to_lowercase)
            .collect();
        let mut sorted: Vec<&String> = words.iter().collect();
        sorted.sort();
        let joined = sorted
            .iter()
            .map(|s| s.as_str())
            .collect::<Vec<_>>()
            .join("\n");
        let version = hex::encode(Sha256::digest(joined.as_bytes()))[..16].to_string();
        Self { words, version }
    }

    pub fn bundled() -> Self {
        Self::parse(BUNDLED_STOPWORDS)
    }

    pub fn load(path: &Path) -> Result<Self, FileError> {
        let text = std::fs::read_to_string(path).map_err(|e| FileError::io(path, e))?;
        Ok(Self::parse(&text))
    }

    pub fn from_words<'a>(words: impl IntoIterator<Item = &'a str>) -> Self {
        Self::parse(&words.into_iter().collect::<Vec<_>>().join("\n"))
    }

    pub fn contains(&self, token: &str) -> bool {
        self.words.contains(token)
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    /// Content hash of the (sorted) list.
    pub fn version(&self) -> &str {
        &self.version
    }
}

fn is_dash(c: char) -> bool {
    matches!(c, '\u{2010}'..='\u{2015}' | '\u{2212}')
}

/// Lowercases, splits on whitespace and dash punctuation, strips surrounding
/// non-alphanumerics, and drops empty and all-digit tokens.
pub fn tokenize(text: &str) -> Vec<String> {
    text.to_lowercase()
        .replace('\u{2019}', "'")
        .split(|c: char| c.is_whitespace() || is_dash(c))
        .map(|raw| raw.trim_matches(|c: char| !c.is_alphanumeric()))
        .filter(|t| !t.is_empty() && !t.chars().all(|c| c.is_ascii_digit()))
        .map(str::to_string)
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenCounts {
    pub condition_id: String,
    pub counts: BTreeMap<String, u64>,
    /// Number of non-stop tokens counted.
    pub tokens_total: u64,
}

impl TokenCounts {
    pub fn get(&self, token: &str) -> u64 {
        self.counts.get(token).copied().unwrap_or(0)
    }
}

pub fn frequency_counts<'a>(
    condition_id: &str,
    transcripts: impl IntoIterator<Item = &'a Transcript>,
    stopwords: &StopWords,
) -> TokenCounts {
    let mut counts = BTreeMap::new();
    let mut tokens_total = 0;
    for t in transcripts {
        for token in tokenize(&t.text) {
            if !stopwords.contains(&token) {
                *counts.entry(token).or_insert(0) += 1;
                tokens_total += 1;
            }
        }
    }
    TokenCounts {
        condition_id: condition_id.to_string(),
        counts,
        tokens_total,
    }
}

/// The `top_k` most frequent tokens (ties broken alphabetically), sized
/// linearly by count.
pub fn frequency_cloud(
    counts: &TokenCounts,
    top_k: usize,
    range: FontRange,
) -> Result<Vec<CloudEntry>, LayoutError> {
    let items: Vec<WeightedItem> = counts
        .counts
        .iter()
        .map(|(token, &n)| WeightedItem {
            key: token.clone(),
            display_text: token.clone(),
            weight: n as f64,
            breadth: None,
            participants: Vec::new(),
        })
        .collect();
    font_sizes(&items, range, Some(top_k.max(1)))
}
