//! Document vectors, embedding providers, and removal of the component shared by every
//! document (projection onto the orthogonal complement of an empty-document baseline).

mod hash;
mod sidecar;
mod store;

use serde::{Deserialize, Serialize};

use crate::corpus::{DocKind, ScholarlyDocument};
use crate::error::{Error, Result};

pub use hash::{fnv1a64, hash_embed, tokenize, HashProvider, DEFAULT_HASH_DIM};
pub use sidecar::SidecarProvider;
pub use store::{export_vectors, import_vectors, VectorStore};

/// Reserved doc_id of the empty-template document.
pub const BASELINE_DOC_ID: &str = "__baseline__";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingVector {
    pub doc_id: String,
    pub model_tag: String,
    pub debiased: bool,
    pub components: Vec<f64>,
}

impl EmbeddingVector {
    pub fn new(doc_id: impl Into<String>, model_tag: impl Into<String>, components: Vec<f64>) -> Self {
        EmbeddingVector {
            doc_id: doc_id.into(),
            model_tag: model_tag.into(),
            debiased: false,
            components,
        }
    }

    pub fn dim(&self) -> usize {
        self.components.len()
    }

    pub fn norm(&self) -> f64 {
        dot(&self.components, &self.components).sqrt()
    }

    pub fn check_finite(&self) -> Result<()> {
        if self.components.iter().all(|c| c.is_finite()) {
            Ok(())
        } else {
            Err(Error::NonFiniteVector(self.doc_id.clone()))
        }
    }
}

/// Dot product with a fixed 4-lane accumulation order, so the result never depends on
/// how the caller schedules work.
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 4];
    let chunks_a = a.chunks_exact(4);
    let chunks_b = b.chunks_exact(4);
    let (rest_a, rest_b) = (chunks_a.remainder(), chunks_b.remainder());
    for (x, y) in chunks_a.zip(chunks_b) {
        acc[0] += x[0] * y[0];
        acc[1] += x[1] * y[1];
        acc[2] += x[2] * y[2];
        acc[3] += x[3] * y[3];
    }
    let mut tail = 0.0;
    for (x, y) in rest_a.iter().zip(rest_b) {
        tail += x * y;
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// Something that turns documents into vectors. Identical text under the same model tag must
/// always produce the identical vector.
pub trait EmbeddingProvider: Sync {
    fn model_tag(&self) -> String;

    /// One vector per document, in input order.
    fn embed(&self, docs: &[ScholarlyDocument]) -> Result<Vec<EmbeddingVector>>;
}

/// Embeds a batch and checks the provider kept its side of the contract.
pub fn embed_batch(provider: &dyn EmbeddingProvider, docs: &[ScholarlyDocument]) -> Result<Vec<EmbeddingVector>> {
    if docs.is_empty() {
        return Ok(Vec::new());
    }
    let vectors = provider.embed(docs)?;
    if vectors.len() != docs.len() {
        return Err(Error::Provider {
            doc_id: docs[0].doc_id.clone(),
            message: format!("returned {} vectors for {} documents", vectors.len(), docs.len()),
        });
    }
    let dim = vectors[0].dim();
    for (doc, v) in docs.iter().zip(&vectors) {
        if v.doc_id != doc.doc_id {
            return Err(Error::Provider {
                doc_id: doc.doc_id.clone(),
                message: format!("vector out of order (got `{}`)", v.doc_id),
            });
        }
        if v.dim() != dim {
            return Err(Error::DimensionMismatch {
                doc_id: v.doc_id.clone(),
                expected: dim,
                found: v.dim(),
            });
        }
        v.check_finite()?;
    }
    Ok(vectors)
}

/// The empty document, passed through the provider's usual template.
pub fn baseline_document() -> ScholarlyDocument {
    ScholarlyDocument {
        doc_id: BASELINE_DOC_ID.to_string(),
        kind: DocKind::Publication,
        title: String::new(),
        body: String::new(),
        keywords: Vec::new(),
    }
}

pub fn compute_baseline(provider: &dyn EmbeddingProvider) -> Result<EmbeddingVector> {
    let mut out = embed_batch(provider, &[baseline_document()])?;
    Ok(out.remove(0))
}

/// Removes the baseline direction: `v - (v.b / b.b) b`. A zero baseline leaves `v` as is.
pub fn debias(v: &EmbeddingVector, baseline: &EmbeddingVector) -> Result<EmbeddingVector> {
    if v.dim() != baseline.dim() {
        return Err(Error::DimensionMismatch {
            doc_id: v.doc_id.clone(),
            expected: baseline.dim(),
            found: v.dim(),
        });
    }
    let bb = dot(&baseline.components, &baseline.components);
    let components = if bb == 0.0 {
        v.components.clone()
    } else {
        let scale = dot(&v.components, &baseline.components) / bb;
        v.components
            .iter()
            .zip(&baseline.components)
            .map(|(x, b)| x - scale * b)
            .collect()
    };
    Ok(EmbeddingVector {
        doc_id: v.doc_id.clone(),
        model_tag: v.model_tag.clone(),
        debiased: true,
        components,
    })
}
