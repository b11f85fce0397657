use rayon::prelude::*;

use super::{EmbeddingProvider, EmbeddingVector};
use crate::corpus::ScholarlyDocument;
use crate::error::Result;

pub const DEFAULT_HASH_DIM: usize = 64;

const FNV_OFFSET_BASIS: u64 = 14695981039346656037;
const FNV_PRIME: u64 = 1099511628211;
const TITLE_WEIGHT: f64 = 2.0;
const OTHER_WEIGHT: f64 = 1.0;

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    bytes.iter().fold(FNV_OFFSET_BASIS, |h, &b| (h ^ b as u64).wrapping_mul(FNV_PRIME))
}

/// Lowercased runs of alphanumeric characters.
pub fn tokenize(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
}

/// Feature-hashed bag of words: title tokens weigh 2, body and keyword tokens 1, and the
/// result is scaled to unit length. A document without tokens maps to the zero vector.
pub fn hash_embed(doc: &ScholarlyDocument, dim: usize, model_tag: &str) -> EmbeddingVector {
    assert!(dim >= 2, "hash embedding needs dim >= 2");
    let mut acc = vec![0.0f64; dim];
    let mut add = |text: &str, weight: f64| {
        for token in tokenize(text) {
            acc[(fnv1a64(token.as_bytes()) % dim as u64) as usize] += weight;
        }
    };
    add(&doc.title, TITLE_WEIGHT);
    add(&doc.body, OTHER_WEIGHT);
    for kw in &doc.keywords {
        add(kw, OTHER_WEIGHT);
    }
    let norm = acc.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        for x in &mut acc {
            *x /= norm;
        }
    }
    EmbeddingVector::new(doc.doc_id.clone(), model_tag, acc)
}

/// Deterministic offline provider backed by [`hash_embed`].
#[derive(Debug, Clone)]
pub struct HashProvider {
    dim: usize,
}

impl HashProvider {
    pub fn new(dim: usize) -> Self {
        assert!(dim >= 2, "hash embedding needs dim >= 2");
        HashProvider { dim }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
}

impl Default for HashProvider {
    fn default() -> Self {
        HashProvider::new(DEFAULT_HASH_DIM)
    }
}

impl EmbeddingProvider for HashProvider {
    fn model_tag(&self) -> String {
        format!("hash-fnv1a-{}", self.dim)
    }

    fn embed(&self, docs: &[ScholarlyDocument]) -> Result<Vec<EmbeddingVector>> {
        let tag = self.model_tag();
        Ok(docs.par_iter().map(|d| hash_embed(d, self.dim, &tag)).collect())
    }
}
