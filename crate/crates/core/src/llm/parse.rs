//! Strict parsers for the two response shapes the pipeline relies on:
//! `### label` / `- item` bullet groups from elicitation, and one-term-per-line
//! lists from mapping.

use serde::{Deserialize, Serialize};

use super::GatewayError;
use crate::concepts::{normalize_phrase, ConceptVocabulary};

const BULLET: &str = "- ";
const HEADER: &str = "### ";

/// Bullet items grouped by the `### ` header preceding them, in response order.
/// Items before the first header land in a group with an empty label.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BulletGroups {
    groups: Vec<(String, Vec<String>)>,
}

impl BulletGroups {
    pub fn groups(&self) -> impl Iterator<Item = (&str, &[String])> {
        self.groups
            .iter()
            .map(|(l, items)| (l.as_str(), items.as_slice()))
    }

    pub fn get(&self, label: &str) -> Option<&[String]> {
        let wanted = normalize_phrase(label);
        self.groups
            .iter()
            .find(|(l, _)| normalize_phrase(l) == wanted)
            .map(|(_, items)| items.as_slice())
    }

    /// The only group, if there is exactly one.
    pub fn sole(&self) -> Option<&[String]> {
        match self.groups.as_slice() {
            [(_, items)] => Some(items),
            _ => None,
        }
    }

    pub fn len(&self) -> usize {
        self.groups.len()
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }

    /// Re-serializes in the same `### label` / `- item` shape.
    pub fn to_markdown(&self) -> String {
        let mut out = String::new();
        for (label, items) in &self.groups {
            if !label.is_empty() {
                out.push_str(HEADER);
                out.push_str(label);
                out.push('\n');
            }
            for item in items {
                out.push_str(BULLET);
                out.push_str(item);
                out.push('\n');
            }
        }
        out
    }

    fn push_item(&mut self, label: &str, item: String) {
        match self.groups.iter_mut().find(|(l, _)| l == label) {
            Some((_, items)) => items.push(item),
            None => self.groups.push((label.to_string(), vec![item])),
        }
    }
}

fn header_label(line: &str) -> Option<String> {
    let rest = line.strip_prefix(HEADER)?;
    let label = rest
        .trim()
        .trim_matches(|c: char| c == '*' || c == '[' || c == ']' || c == ':')
        .trim();
    Some(label.to_string())
}

/// Extracts `- ` bullet lines, grouped by `### ` headers. Anything else
/// (commentary, blank lines, numbered lists) is ignored.
///
/// Fails with [`GatewayError::Format`] when there are no bullets at all and
/// with [`GatewayError::Underfull`] when some group has fewer than
/// `expected_n` items; the latter carries the full partial parse.
pub fn parse_bullet_list(raw: &str, expected_n: usize) -> Result<BulletGroups, GatewayError> {
    let mut groups = BulletGroups::default();
    let mut label = String::new();
    for line in raw.lines() {
        let line = line.trim_start();
        if let Some(l) = header_label(line) {
            label = l;
        } else if let Some(item) = line.strip_prefix(BULLET) {
            let item = item.trim();
            if !item.is_empty() {
                groups.push_item(&label, item.to_string());
            }
        }
    }
    if groups.is_empty() {
        return Err(GatewayError::Format(
            "response contains no '- ' bullet items".into(),
        ));
    }
    if let Some((label, items)) = groups
        .groups
        .iter()
        .find(|(_, items)| items.len() < expected_n)
    {
        return Err(GatewayError::Underfull {
            group: label.clone(),
            expected: expected_n,
            got: items.len(),
            partial: groups.clone(),
        });
    }
    Ok(groups)
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LineListParse {
    /// Vocabulary indices of matched concepts, distinct, in response order.
    pub matched: Vec<usize>,
    /// Non-empty lines that matched nothing.
    pub unmatched: Vec<String>,
    /// Distinct matches dropped by the `max_items` cap.
    pub truncated: usize,
    pub warnings: Vec<String>,
}

/// Matches each response line to the vocabulary by normalized key. Never
/// fails: unmatched lines are dropped and reported, duplicates collapse,
/// and only the first `max_items` distinct matches are kept.
pub fn parse_line_list(
    raw: &str,
    vocabulary: &ConceptVocabulary,
    max_items: usize,
) -> LineListParse {
    let mut out = LineListParse::default();
    for line in raw.lines() {
        let key = normalize_phrase(line);
        if key.is_empty() {
            continue;
        }
        match vocabulary.position(&key) {
            Some(idx) if out.matched.contains(&idx) => {}
            Some(_) if out.matched.len() >= max_items => out.truncated += 1,
            Some(idx) => out.matched.push(idx),
            None => out.unmatched.push(line.trim().to_string()),
        }
    }
    if !out.unmatched.is_empty() {
        out.warnings.push(format!(
            "dropped {} line(s) not in the vocabulary: {:?}",
            out.unmatched.len(),
            out.unmatched
        ));
    }
    if out.truncated > 0 {
        out.warnings.push(format!(
            "kept the first {max_items} matches; {} more dropped",
            out.truncated
        ));
    }
    if out.matched.is_empty() && !out.unmatched.is_empty() {
        out.warnings
            .push("no line matched the vocabulary; treating as no concepts present".into());
    }
    for w in &out.warnings {
        tracing::info!("{w}");
    }
    out
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ScoreListParse {
    /// One slot per vocabulary concept; `None` when the response skipped it.
    pub scores: Vec<Option<f64>>,
    pub unmatched: Vec<String>,
}

/// Parses `term: score` lines for graded presence. Scores must lie in [0, 1].
pub fn parse_score_list(
    raw: &str,
    vocabulary: &ConceptVocabulary,
) -> Result<ScoreListParse, GatewayError> {
    let mut out = ScoreListParse {
        scores: vec![None; vocabulary.len()],
        unmatched: Vec::new(),
    };
    let mut scored = 0;
    for line in raw.lines() {
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let Some((term, value)) = trimmed.rsplit_once(':') else {
            out.unmatched.push(trimmed.to_string());
            continue;
        };
        let Ok(score) = value.trim().parse::<f64>() else {
            out.unmatched.push(trimmed.to_string());
            continue;
        };
        if !(0.0..=1.0).contains(&score) {
            return Err(GatewayError::Format(format!(
                "score out of [0, 1] in line {trimmed:?}"
            )));
        }
        match vocabulary.position(&normalize_phrase(term)) {
            Some(idx) => {
                if out.scores[idx].is_none() {
                    scored += 1;
                }
                out.scores[idx] = Some(score);
            }
            None => out.unmatched.push(trimmed.to_string()),
        }
    }
    if scored == 0 {
        return Err(GatewayError::Format(
            "response contains no 'term: score' lines for known terms".into(),
        ));
    }
    Ok(out)
}
