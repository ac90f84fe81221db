use std::collections::BTreeMap;

use crate::error::{Error, Result};

/// Externally computed block vectors keyed by `(document id, block id)`.
#[derive(Clone, Debug, PartialEq)]
pub struct PrecomputedBlocks {
    pub dim: usize,
    pub(crate) vectors: BTreeMap<(String, usize), Vec<f32>>,
}

impl PrecomputedBlocks {
    pub fn new(dim: usize) -> Self {
        PrecomputedBlocks {
            dim,
            vectors: BTreeMap::new(),
        }
    }

    pub fn insert(&mut self, doc: &str, block: usize, v: Vec<f32>) -> Result<()> {
        if v.len() != self.dim {
            return Err(Error::invalid(format!("vector of length {} for dimension {}", v.len(), self.dim)));
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid(format!("non-finite vector for {doc}/{block}")));
        }
        self.vectors.insert((doc.to_string(), block), v);
        Ok(())
    }

    pub fn get(&self, doc: &str, block: usize) -> Result<&[f32]> {
        self.vectors
            .get(&(doc.to_string(), block))
            .map(|v| v.as_slice())
            .ok_or_else(|| Error::MissingEmbedding(format!("{doc}/{block}")))
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }
}
