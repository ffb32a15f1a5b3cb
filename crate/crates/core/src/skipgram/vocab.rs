//! Corpus vocabulary: user ids with occurrence counts.

use std::collections::HashMap;

use crate::corpus::WalkCorpus;
use crate::error::{Error, Result};

/// Users observed in the corpus at least `min_count` times, ordered by
/// (count descending, user_id ascending). Index positions are stable and
/// serve as row indices into the embedding matrices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    words: Vec<String>,
    counts: Vec<u64>,
    index: HashMap<String, u32>,
    total_count: u64,
    min_count: u64,
}

impl Vocabulary {
    /// Count corpus tokens and keep those occurring at least `min_count`
    /// times. Errors if the corpus has no tokens at all.
    pub fn build(corpus: &WalkCorpus, min_count: u64) -> Result<Self> {
        if corpus.token_count() == 0 {
            return Err(Error::EmptyCorpus);
        }
        let mut counts: HashMap<&str, u64> = HashMap::new();
        for walk in &corpus.walks {
            for user in walk {
                *counts.entry(user.as_str()).or_insert(0) += 1;
            }
        }
        let mut entries: Vec<(&str, u64)> = counts
            .into_iter()
            .filter(|&(_, c)| c >= min_count)
            .collect();
        entries.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        let words: Vec<String> = entries.iter().map(|(w, _)| w.to_string()).collect();
        let counts: Vec<u64> = entries.iter().map(|&(_, c)| c).collect();
        let index = words
            .iter()
            .enumerate()
            .map(|(i, w)| (w.clone(), i as u32))
            .collect();
        let total_count = counts.iter().sum();
        Ok(Vocabulary {
            words,
            counts,
            index,
            total_count,
            min_count,
        })
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn get(&self, user: &str) -> Option<u32> {
        self.index.get(user).copied()
    }

    pub fn word(&self, idx: usize) -> &str {
        &self.words[idx]
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn count(&self, idx: usize) -> u64 {
        self.counts[idx]
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    /// Sum of retained counts.
    pub fn total_count(&self) -> u64 {
        self.total_count
    }

    pub fn min_count(&self) -> u64 {
        self.min_count
    }

    /// Corpus frequency of the word at `idx`, relative to retained tokens.
    pub fn frequency(&self, idx: usize) -> f64 {
        self.counts[idx] as f64 / self.total_count as f64
    }
}
