//! Participant-breadth counts, visual weights, and condition contrasts.
//!
//! Breadth is the number of transcripts (one per participant within a
//! condition) whose row marks a concept present. It cannot grow with how
//! much a participant talks, only with how many participants raise a concept.

use std::collections::BTreeSet;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mapping::AssignmentTable;

pub const DEFAULT_DIFF_MARGIN: u32 = 1;

#[derive(Debug, Error, PartialEq)]
pub enum SalienceError {
    #[error("table for {condition} has {count} incomplete row(s); re-run mapping or force")]
    Incomplete { condition: String, count: usize },
    #[error("table for {0} is stale against the current vocabulary; re-run mapping or force")]
    Stale(String),
    #[error("table for {0} has no judged rows")]
    NoRows(String),
    #[error("cannot diff condition {0} with itself")]
    SameCondition(String),
    #[error("unknown scale mode {0:?} (expected linear, log or sqrt)")]
    UnknownScale(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BreadthCounts {
    pub condition_id: String,
    pub m_total: u32,
    /// b(c) per concept key, in vocabulary order.
    pub counts: IndexMap<String, u32>,
    /// Set when computed with `force` over an incomplete or stale table.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub forced: Option<String>,
}

impl BreadthCounts {
    pub fn get(&self, key: &str) -> u32 {
        self.counts.get(key).copied().unwrap_or(0)
    }

    /// The flat export object `{condition_id, m_total, counts}`.
    pub fn to_json(&self) -> String {
        let mut out = serde_json::to_string_pretty(self).expect("counts serialize");
        out.push('\n');
        out
    }
}

/// Counts rows with a 1 in each column. Refuses incomplete or stale tables
/// unless `force` is set, in which case incomplete rows are skipped and the
/// output is annotated.
pub fn compute_breadth(
    table: &AssignmentTable,
    force: bool,
) -> Result<BreadthCounts, SalienceError> {
    let incomplete = table.incomplete_rows().len();
    let mut forced = Vec::new();
    if incomplete > 0 {
        if !force {
            return Err(SalienceError::Incomplete {
                condition: table.condition_id.clone(),
                count: incomplete,
            });
        }
        forced.push(format!("{incomplete} incomplete row(s) excluded"));
    }
    if table.is_stale() {
        if !force {
            return Err(SalienceError::Stale(table.condition_id.clone()));
        }
        forced.push("table is stale against the current vocabulary".to_string());
    }

    let mut counts: IndexMap<String, u32> = table
        .concept_keys()
        .iter()
        .map(|k| (k.clone(), 0))
        .collect();
    let mut m_total = 0;
    for row in table.rows().iter().filter(|r| r.is_complete()) {
        m_total += 1;
        for (count, cell) in counts.values_mut().zip(&row.cells) {
            *count += u32::from(cell.value);
        }
    }
    if m_total == 0 {
        return Err(SalienceError::NoRows(table.condition_id.clone()));
    }
    Ok(BreadthCounts {
        condition_id: table.condition_id.clone(),
        m_total,
        counts,
        forced: (!forced.is_empty()).then(|| forced.join("; ")),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScaleMode {
    #[default]
    Linear,
    Log,
    Sqrt,
}

impl ScaleMode {
    /// g(b): identity, ln(1 + b), or √b. All map 0 to 0.
    pub fn apply(self, breadth: u32) -> f64 {
        let b = f64::from(breadth);
        match self {
            ScaleMode::Linear => b,
            ScaleMode::Log => b.ln_1p(),
            ScaleMode::Sqrt => b.sqrt(),
        }
    }
}

impl std::str::FromStr for ScaleMode {
    type Err = SalienceError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "linear" => Ok(Self::Linear),
            "log" => Ok(Self::Log),
            "sqrt" => Ok(Self::Sqrt),
            other => Err(SalienceError::UnknownScale(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaledWeights {
    pub condition_id: String,
    pub mode: ScaleMode,
    pub weights: IndexMap<String, f64>,
}

pub fn scale_weights(breadth: &BreadthCounts, mode: ScaleMode) -> ScaledWeights {
    ScaledWeights {
        condition_id: breadth.condition_id.clone(),
        mode,
        weights: breadth
            .counts
            .iter()
            .map(|(k, &b)| (k.clone(), mode.apply(b)))
            .collect(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiffClass {
    ADominant,
    BDominant,
    WithinMargin,
}

pub fn classify_delta(delta: i64, margin: u32) -> DiffClass {
    if delta.unsigned_abs() <= u64::from(margin) {
        DiffClass::WithinMargin
    } else if delta > 0 {
        DiffClass::ADominant
    } else {
        DiffClass::BDominant
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiffResult {
    pub condition_a: String,
    pub condition_b: String,
    pub margin: u32,
    /// Δb(c) = b_A(c) − b_B(c) over the union of keys: A's order first, then keys only in B.
    pub deltas: IndexMap<String, i64>,
}

impl DiffResult {
    pub fn class_of(&self, key: &str) -> Option<DiffClass> {
        self.deltas
            .get(key)
            .map(|&d| classify_delta(d, self.margin))
    }

    pub fn within_margin(&self) -> BTreeSet<&str> {
        self.deltas
            .iter()
            .filter(|(_, &d)| classify_delta(d, self.margin) == DiffClass::WithinMargin)
            .map(|(k, _)| k.as_str())
            .collect()
    }
}

/// Contrasts two conditions over the union of their concept keys; a key
/// missing on one side counts as 0 there.
pub fn diff_breadth(
    a: &BreadthCounts,
    b: &BreadthCounts,
    margin: u32,
) -> Result<DiffResult, SalienceError> {
    if a.condition_id == b.condition_id {
        return Err(SalienceError::SameCondition(a.condition_id.clone()));
    }
    let mut deltas = IndexMap::new();
    for key in a.counts.keys().chain(b.counts.keys()) {
        deltas
            .entry(key.clone())
            .or_insert_with(|| i64::from(a.get(key)) - i64::from(b.get(key)));
    }
    Ok(DiffResult {
        condition_a: a.condition_id.clone(),
        condition_b: b.condition_id.clone(),
        margin,
        deltas,
    })
}
