//! Word-level vocabulary with dense ids and the four special markers.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

pub const MASK_TOKEN: &str = "<mask>";
pub const PAD_TOKEN: &str = "<pad>";
pub const BEGIN_TOKEN: &str = "<s>";
pub const END_TOKEN: &str = "</s>";

/// Token strings with dense ids `0..V-1`; the four special markers occupy
/// the first ids. Word tokens come from lowercased whitespace splitting
/// with a frequency cutoff.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vocab {
    tokens: Vec<String>,
    index: BTreeMap<String, u32>,
}

impl Vocab {
    /// Build from a corpus, keeping words seen at least `min_freq` times.
    /// Words are ordered by descending frequency, ties alphabetically, so
    /// construction is deterministic.
    pub fn from_texts<'a, I>(texts: I, min_freq: u64) -> Self
    where
        I: IntoIterator<Item = &'a str>,
    {
        let mut counts: BTreeMap<String, u64> = BTreeMap::new();
        for text in texts {
            for word in text.split_whitespace() {
                *counts.entry(word.to_lowercase()).or_insert(0) += 1;
            }
        }
        let mut words: Vec<(String, u64)> = counts
            .into_iter()
            .filter(|(_, c)| *c >= min_freq.max(1))
            .collect();
        words.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        let mut tokens: Vec<String> = [MASK_TOKEN, PAD_TOKEN, BEGIN_TOKEN, END_TOKEN]
            .iter()
            .map(|s| s.to_string())
            .collect();
        tokens.extend(words.into_iter().map(|(w, _)| w));
        let index = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i as u32))
            .collect();
        Vocab { tokens, index }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        false // the specials are always present
    }

    pub fn mask_id(&self) -> u32 {
        0
    }

    pub fn pad_id(&self) -> u32 {
        1
    }

    pub fn begin_id(&self) -> u32 {
        2
    }

    pub fn end_id(&self) -> u32 {
        3
    }

    pub fn id_of(&self, token: &str) -> Option<u32> {
        self.index.get(token).copied()
    }

    pub fn token_of(&self, id: u32) -> Option<&str> {
        self.tokens.get(id as usize).map(String::as_str)
    }

    /// Map words to ids; out-of-vocabulary words become the mask id.
    pub fn encode(&self, text: &str) -> Vec<u32> {
        text.split_whitespace()
            .map(|w| self.id_of(&w.to_lowercase()).unwrap_or(self.mask_id()))
            .collect()
    }

    pub fn decode_tokens(&self, ids: &[u32]) -> Vec<&str> {
        ids.iter()
            .filter_map(|id| self.token_of(*id))
            .collect()
    }
}
