//! Pseudo-labeling: the `k` highest-scoring items are labeled seen and the
//! `k` lowest unseen, giving the improved attacks a training set.
//!
//! Labels come from score extremes of the pool, not from true membership.

use std::cmp::Ordering;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scoring::{Level, ScoreRow, ScoreTable};

/// Engine default `k` for each level.
pub fn default_k(level: Level) -> usize {
    match level {
        Level::Utterance => 500,
        Level::Speaker => 1,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PseudoLabelSet {
    pub level: Level,
    pub k: usize,
    /// Pseudo-seen ids, highest score first.
    pub positives: Vec<String>,
    /// Pseudo-unseen ids, the tail of the same ranking (lowest score last).
    pub negatives: Vec<String>,
}

impl PseudoLabelSet {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::Validation("k must be at least 1".into()));
        }
        if self.positives.len() != self.k || self.negatives.len() != self.k {
            return Err(Error::Validation(format!(
                "expected {} positives and negatives, got {} and {}",
                self.k,
                self.positives.len(),
                self.negatives.len()
            )));
        }
        if let Some(id) = self.positives.iter().find(|p| self.negatives.contains(p)) {
            return Err(Error::Validation(format!("{id:?} is both positive and negative")));
        }
        Ok(())
    }

    /// `(id, label)` pairs, positives (label 1) first.
    pub fn examples(&self) -> impl Iterator<Item = (&str, f64)> {
        self.positives
            .iter()
            .map(|id| (id.as_str(), 1.0))
            .chain(self.negatives.iter().map(|id| (id.as_str(), 0.0)))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let set: PseudoLabelSet = serde_json::from_str(&text)?;
        set.validate()?;
        Ok(set)
    }
}

/// Pool size at which the utterance default `k = 500` applies unscaled
/// (the four held-out LibriSpeech dev/test subsets together).
pub const REFERENCE_POOL_SIZE: usize = 11126;

/// Default `k` for a pool of `pool_size` items. Utterance level keeps the
/// reference ratio `500 / 11126`, rounded half away from zero and at least 1;
/// speaker level is always 1.
pub fn scaled_k(level: Level, pool_size: usize) -> usize {
    match level {
        Level::Utterance => {
            let k = (default_k(level) as f64 * pool_size as f64 / REFERENCE_POOL_SIZE as f64).round();
            (k as usize).max(1)
        }
        Level::Speaker => default_k(level),
    }
}

/// Descending score, ties broken by ascending id.
fn ranking(a: &ScoreRow, b: &ScoreRow) -> Ordering {
    b.score.total_cmp(&a.score).then_with(|| a.id.cmp(&b.id))
}

/// Selects the top-`k` rows as pseudo-seen and the bottom-`k` as pseudo-unseen.
pub fn select(table: &ScoreTable, k: usize) -> Result<PseudoLabelSet> {
    if k == 0 {
        return Err(Error::Validation("k must be at least 1".into()));
    }
    let available = table.len();
    if 2 * k > available {
        return Err(Error::InsufficientData {
            requested: 2 * k,
            available,
        });
    }
    let mut rows: Vec<&ScoreRow> = table.rows().iter().collect();
    rows.sort_by(|a, b| ranking(a, b));
    let positives: Vec<String> = rows[..k].iter().map(|r| r.id.clone()).collect();
    let negatives: Vec<String> = rows[available - k..].iter().map(|r| r.id.clone()).collect();
    let set = PseudoLabelSet {
        level: table.kind(),
        k,
        positives,
        negatives,
    };
    debug_assert!(set.validate().is_ok());
    Ok(set)
}
