use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::Command;

use serde::Serialize;

use super::store::import_vectors;
use super::{EmbeddingProvider, EmbeddingVector};
use crate::corpus::{write_jsonl, ScholarlyDocument};
use crate::error::{Error, Result};

/// Runs an external embedding program:
/// `<program> [extra args] --in docs.jsonl --out vectors.jsonl --model <tag>`.
#[derive(Debug, Clone)]
pub struct SidecarProvider {
    program: PathBuf,
    extra_args: Vec<String>,
    model: String,
}

#[derive(Serialize)]
struct SidecarDoc<'a> {
    doc_id: &'a str,
    title: &'a str,
    body: &'a str,
    keywords: &'a [String],
}

impl SidecarProvider {
    pub fn new(program: impl Into<PathBuf>, model: impl Into<String>) -> Self {
        SidecarProvider {
            program: program.into(),
            extra_args: Vec::new(),
            model: model.into(),
        }
    }

    /// Arguments placed before the protocol flags, e.g. a script path when `program` is an
    /// interpreter.
    pub fn with_args(mut self, args: impl IntoIterator<Item = String>) -> Self {
        self.extra_args.extend(args);
        self
    }

    fn run(&self, input: &Path, output: &Path) -> Result<()> {
        let out = Command::new(&self.program)
            .args(&self.extra_args)
            .arg("--in")
            .arg(input)
            .arg("--out")
            .arg(output)
            .arg("--model")
            .arg(&self.model)
            .output()
            .map_err(|e| Error::io(&self.program, e))?;
        if out.status.success() {
            return Ok(());
        }
        let stderr = String::from_utf8_lossy(&out.stderr);
        let diagnostic = stderr
            .lines()
            .rev()
            .find(|l| !l.trim().is_empty())
            .unwrap_or("no diagnostic")
            .trim()
            .to_string();
        Err(Error::Provider {
            doc_id: "<batch>".into(),
            message: format!("sidecar exited with {}: {diagnostic}", out.status),
        })
    }
}

impl EmbeddingProvider for SidecarProvider {
    fn model_tag(&self) -> String {
        self.model.clone()
    }

    fn embed(&self, docs: &[ScholarlyDocument]) -> Result<Vec<EmbeddingVector>> {
        if docs.is_empty() {
            return Ok(Vec::new());
        }
        // The protocol wants unique doc_ids per batch.
        let mut unique: BTreeMap<&str, &ScholarlyDocument> = BTreeMap::new();
        for d in docs {
            unique.entry(d.doc_id.as_str()).or_insert(d);
        }
        let dir = tempfile::tempdir().map_err(|e| Error::io(std::env::temp_dir(), e))?;
        let input = dir.path().join("docs.jsonl");
        let output = dir.path().join("vectors.jsonl");
        let rows: Vec<SidecarDoc<'_>> = unique
            .values()
            .map(|d| SidecarDoc {
                doc_id: &d.doc_id,
                title: &d.title,
                body: &d.body,
                keywords: &d.keywords,
            })
            .collect();
        write_jsonl(&input, &rows)?;
        self.run(&input, &output)?;

        let store = import_vectors(&output)?;
        let baseline = store.baseline().cloned();
        docs.iter()
            .map(|d| {
                let found = if Some(d.doc_id.as_str()) == baseline.as_ref().map(|b| b.doc_id.as_str()) {
                    baseline.clone()
                } else {
                    store.get(&d.doc_id).cloned()
                };
                found.ok_or_else(|| Error::Provider {
                    doc_id: d.doc_id.clone(),
                    message: "sidecar output has no vector for this document".into(),
                })
            })
            .collect()
    }
}
