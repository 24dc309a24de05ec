use std::collections::HashMap;

use crate::hashing::{key_digest, KeyDigest};

/// Exact term → sorted set-ID postings; ground truth for accuracy checks.
#[derive(Debug, Clone, Default)]
pub struct InvertedIndexOracle {
    postings: HashMap<KeyDigest, Vec<u32>>,
}

impl InvertedIndexOracle {
    pub fn new() -> Self {
        Self::default()
    }

    /// Build from `(set name, terms)` pairs; set IDs follow corpus order with
    /// repeated names sharing an ID, matching the index registry.
    pub fn build<I, N, T, B>(corpus: I) -> Self
    where
        I: IntoIterator<Item = (N, T)>,
        N: AsRef<str>,
        T: IntoIterator<Item = B>,
        B: AsRef<[u8]>,
    {
        let mut oracle = Self::new();
        let mut ids: HashMap<String, u32> = HashMap::new();
        for (name, terms) in corpus {
            let next = ids.len() as u32;
            let id = *ids.entry(name.as_ref().to_owned()).or_insert(next);
            for t in terms {
                oracle.insert(id, t.as_ref());
            }
        }
        oracle
    }

    pub fn insert(&mut self, set_id: u32, term: &[u8]) {
        let list = self.postings.entry(key_digest(term)).or_default();
        if let Err(pos) = list.binary_search(&set_id) {
            list.insert(pos, set_id);
        }
    }

    pub fn query(&self, term: &[u8]) -> &[u32] {
        self.postings.get(&key_digest(term)).map_or(&[], Vec::as_slice)
    }

    pub fn num_terms(&self) -> usize {
        self.postings.len()
    }
}
