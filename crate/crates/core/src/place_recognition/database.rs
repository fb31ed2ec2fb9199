use serde::{Deserialize, Serialize};

use super::bow::{bow_score, BowVector};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BowCandidate {
    pub id: u64,
    pub score: f64,
}

/// Observation BoW vectors available for loop-closure queries.
///
/// A query made on behalf of observation `n` only sees entries with
/// `id ≤ n − delay`, however early they were inserted.
#[derive(Clone, Debug, Default)]
pub struct BowDatabase {
    entries: Vec<(u64, BowVector)>,
    delay: u64,
}

impl BowDatabase {
    pub fn new(delay: u64) -> Self {
        Self {
            entries: Vec::new(),
            delay,
        }
    }

    pub fn delay(&self) -> u64 {
        self.delay
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn last_id(&self) -> Option<u64> {
        self.entries.last().map(|e| e.0)
    }

    pub fn insert(&mut self, id: u64, bow: BowVector) -> Result<()> {
        if let Some(last) = self.last_id() {
            if id <= last {
                return Err(Error::InvalidConfig(format!(
                    "database ids must increase: {id} after {last}"
                )));
            }
        }
        self.entries.push((id, bow));
        Ok(())
    }

    /// Entries old enough for `current_id` scoring at least `min_score`,
    /// best first (ties by ascending id).
    pub fn query(&self, bow: &BowVector, current_id: u64, min_score: f64) -> Vec<BowCandidate> {
        let Some(newest) = current_id.checked_sub(self.delay) else {
            return Vec::new();
        };
        let mut out: Vec<BowCandidate> = self
            .entries
            .iter()
            .take_while(|(id, _)| *id <= newest)
            .map(|(id, v)| BowCandidate {
                id: *id,
                score: bow_score(bow, v),
            })
            .filter(|c| c.score >= min_score)
            .collect();
        out.sort_by(|a, b| b.score.total_cmp(&a.score).then(a.id.cmp(&b.id)));
        out
    }
}
