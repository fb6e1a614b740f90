use std::collections::{BTreeSet, HashMap};

use crate::extraction::{tokenize, SemanticKind, SemanticValue};

use super::{IndexError, SemanticSpace};

/// Inverted index from lowercase tokens to item ids.
#[derive(Debug, Default, Clone)]
pub struct TextIndex {
    postings: HashMap<String, BTreeSet<u64>>,
}

impl TextIndex {
    pub fn build(space: &SemanticSpace) -> Result<Self, IndexError> {
        if !matches!(space.kind, SemanticKind::Text | SemanticKind::Categorical) {
            return Err(IndexError::KindMismatch { expected: SemanticKind::Text, got: space.kind });
        }
        let mut idx = TextIndex::default();
        for (id, v) in space.iter() {
            if let SemanticValue::Text(s) | SemanticValue::Categorical(s) = v {
                idx.insert(id, s);
            }
        }
        Ok(idx)
    }

    pub fn insert(&mut self, id: u64, text: &str) {
        for t in tokenize(text) {
            self.postings.entry(t).or_default().insert(id);
        }
    }

    /// Ids whose text contains `token`, ascending.
    pub fn lookup(&self, token: &str) -> Vec<u64> {
        self.postings.get(&token.to_lowercase()).map(|s| s.iter().copied().collect()).unwrap_or_default()
    }
}
