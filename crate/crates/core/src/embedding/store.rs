use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{debias, EmbeddingVector, BASELINE_DOC_ID};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Header {
    model_tag: String,
    dim: usize,
    debiased: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Row {
    doc_id: String,
    v: Vec<f64>,
}

/// All vectors of one model, keyed by doc_id. Built once, then only read.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorStore {
    model_tag: String,
    dim: usize,
    baseline: Option<EmbeddingVector>,
    entries: BTreeMap<String, EmbeddingVector>,
    debiased: bool,
}

impl VectorStore {
    pub fn new(model_tag: impl Into<String>, dim: usize) -> Self {
        VectorStore {
            model_tag: model_tag.into(),
            dim,
            baseline: None,
            entries: BTreeMap::new(),
            debiased: false,
        }
    }

    pub fn model_tag(&self) -> &str {
        &self.model_tag
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn is_debiased(&self) -> bool {
        self.debiased
    }

    pub fn baseline(&self) -> Option<&EmbeddingVector> {
        self.baseline.as_ref()
    }

    pub fn get(&self, doc_id: &str) -> Option<&EmbeddingVector> {
        self.entries.get(doc_id)
    }

    pub fn require(&self, doc_id: &str) -> Result<&EmbeddingVector> {
        self.get(doc_id)
            .ok_or_else(|| Error::MissingVector(doc_id.to_string()))
    }

    pub fn iter(&self) -> impl Iterator<Item = &EmbeddingVector> {
        self.entries.values()
    }

    fn check(&self, v: &EmbeddingVector) -> Result<()> {
        if v.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                doc_id: v.doc_id.clone(),
                expected: self.dim,
                found: v.dim(),
            });
        }
        if v.model_tag != self.model_tag {
            return Err(Error::ModelTagMismatch {
                doc_id: v.doc_id.clone(),
                expected: self.model_tag.clone(),
                found: v.model_tag.clone(),
            });
        }
        v.check_finite()
    }

    pub fn insert(&mut self, v: EmbeddingVector) -> Result<()> {
        self.check(&v)?;
        if v.debiased != self.debiased {
            return Err(Error::Provider {
                doc_id: v.doc_id.clone(),
                message: "debiased flag differs from the rest of the store".into(),
            });
        }
        if self.entries.contains_key(&v.doc_id) {
            return Err(Error::DuplicateVector(v.doc_id));
        }
        self.entries.insert(v.doc_id.clone(), v);
        Ok(())
    }

    /// Records the baseline without changing any entry.
    pub fn set_baseline(&mut self, baseline: EmbeddingVector) -> Result<()> {
        self.check(&baseline)?;
        self.baseline = Some(baseline);
        Ok(())
    }

    /// Projects every entry against `baseline` and marks the store debiased.
    pub fn debias_all(&mut self, baseline: EmbeddingVector) -> Result<()> {
        self.check(&baseline)?;
        if self.debiased {
            return Err(Error::Provider {
                doc_id: baseline.doc_id,
                message: "store is already debiased".into(),
            });
        }
        for v in self.entries.values_mut() {
            *v = debias(v, &baseline)?;
        }
        self.baseline = Some(baseline);
        self.debiased = true;
        Ok(())
    }
}

fn parse_err(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

/// Reads `vectors.jsonl`: a header line, then one `{"doc_id", "v"}` row per document.
/// A `__baseline__` row becomes the store baseline.
pub fn import_vectors(path: &Path) -> Result<VectorStore> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut lines = BufReader::new(file).lines().enumerate();
    let header: Header = loop {
        match lines.next() {
            None => return Err(parse_err(path, 1, "missing header line")),
            Some((idx, line)) => {
                let line = line.map_err(|e| Error::io(path, e))?;
                if line.trim().is_empty() {
                    continue;
                }
                break serde_json::from_str(&line)
                    .map_err(|e| parse_err(path, idx + 1, format!("malformed header: {e}")))?;
            }
        }
    };
    let mut store = VectorStore::new(header.model_tag.clone(), header.dim);
    store.debiased = header.debiased;
    for (idx, line) in lines {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let row: Row = serde_json::from_str(&line)
            .map_err(|e| parse_err(path, idx + 1, format!("malformed row: {e}")))?;
        let mut v = EmbeddingVector::new(row.doc_id, header.model_tag.clone(), row.v);
        v.debiased = header.debiased;
        if v.doc_id == BASELINE_DOC_ID {
            if store.baseline.is_some() {
                return Err(Error::DuplicateVector(v.doc_id));
            }
            v.debiased = false;
            store.set_baseline(v)?;
        } else {
            store.insert(v)?;
        }
    }
    if store.debiased && store.baseline.is_none() {
        return Err(parse_err(path, 1, "debiased store without a __baseline__ row"));
    }
    Ok(store)
}

/// Writes the store in the format [`import_vectors`] reads, baseline first, then by doc_id.
pub fn export_vectors(store: &VectorStore, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let header = Header {
        model_tag: store.model_tag.clone(),
        dim: store.dim,
        debiased: store.debiased,
    };
    let io = |e: std::io::Error| Error::io(path, e);
    serde_json::to_writer(&mut w, &header).map_err(|e| io(e.into()))?;
    w.write_all(b"\n").map_err(io)?;
    for v in store.baseline.iter().chain(store.entries.values()) {
        serde_json::to_writer(
            &mut w,
            &RowRef {
                doc_id: &v.doc_id,
                v: &v.components,
            },
        )
        .map_err(|e| io(e.into()))?;
        w.write_all(b"\n").map_err(io)?;
    }
    w.flush().map_err(io)
}

#[derive(Serialize)]
struct RowRef<'a> {
    doc_id: &'a str,
    v: &'a [f64],
}
