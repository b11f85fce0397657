//! The in-memory corpus a run works on, the run itself, and the immutable snapshot it yields.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::analytics::{analyze, Analytics};
use crate::config::{PipelineConfig, ProviderKind};
use crate::corpus::{
    call_document, filter_population, publication_document, read_jsonl_strict, CallRecord,
    PublicationRecord, ResearcherProfile, ScholarlyDocument,
};
use crate::embedding::{
    compute_baseline, embed_batch, import_vectors, EmbeddingProvider, HashProvider,
    SidecarProvider, VectorStore, DEFAULT_HASH_DIM,
};
use crate::error::{Error, Result};
use crate::profiling::Profiler;
use crate::ranking::Ranking;
use crate::reports::{CALLS_FILE, PUBLICATIONS_FILE, RESEARCHERS_FILE, VECTORS_FILE};
use crate::scoring::{score_matrix, ScoreRow};

/// Everything a run reads: publications, calls, resolved researchers and their vectors.
#[derive(Debug, Clone)]
pub struct Corpus {
    pub publications: BTreeMap<String, PublicationRecord>,
    /// Sorted by call_id.
    pub calls: Vec<CallRecord>,
    /// Sorted by researcher_id.
    pub researchers: Vec<ResearcherProfile>,
    pub vectors: VectorStore,
}

struct HashWriter(Sha256);

impl Write for HashWriter {
    fn write(&mut self, buf: &[u8]) -> std::io::Result<usize> {
        self.0.update(buf);
        Ok(buf.len())
    }

    fn flush(&mut self) -> std::io::Result<()> {
        Ok(())
    }
}

fn feed<T: Serialize>(h: &mut HashWriter, value: &T) {
    serde_json::to_writer(&mut *h, value).expect("corpus serializes");
    h.0.update(b"\n");
}

impl Corpus {
    pub fn new(
        publications: impl IntoIterator<Item = PublicationRecord>,
        mut calls: Vec<CallRecord>,
        mut researchers: Vec<ResearcherProfile>,
        vectors: VectorStore,
    ) -> Corpus {
        calls.sort_by(|a, b| a.call_id.cmp(&b.call_id));
        researchers.sort_by(|a, b| a.researcher_id.cmp(&b.researcher_id));
        Corpus {
            publications: publications.into_iter().map(|p| (p.pub_id.clone(), p)).collect(),
            calls,
            researchers,
            vectors,
        }
    }

    /// Loads the stage files of a work directory.
    pub fn load(dir: &Path) -> Result<Corpus> {
        let pubs: Vec<PublicationRecord> = read_jsonl_strict(&dir.join(PUBLICATIONS_FILE))?;
        let calls: Vec<CallRecord> = read_jsonl_strict(&dir.join(CALLS_FILE))?;
        let researchers: Vec<ResearcherProfile> = read_jsonl_strict(&dir.join(RESEARCHERS_FILE))?;
        let vectors = import_vectors(&dir.join(VECTORS_FILE))?;
        Ok(Corpus::new(pubs, calls, researchers, vectors))
    }

    pub fn call_ids(&self) -> Vec<String> {
        self.calls.iter().map(|c| c.call_id.clone()).collect()
    }

    /// SHA-256 over the canonical serialization of every input of a run.
    pub fn digest(&self) -> String {
        let mut h = HashWriter(Sha256::new());
        for p in self.publications.values() {
            feed(&mut h, p);
        }
        for c in &self.calls {
            feed(&mut h, c);
        }
        for r in &self.researchers {
            feed(&mut h, r);
        }
        feed(&mut h, &(self.vectors.model_tag(), self.vectors.dim(), self.vectors.is_debiased()));
        for v in self.vectors.baseline().into_iter().chain(self.vectors.iter()) {
            feed(&mut h, &(&v.doc_id, &v.components));
        }
        hex::encode(h.0.finalize())
    }
}

/// Publication documents then call documents, each in id order.
pub fn corpus_documents<'a>(
    pubs: impl IntoIterator<Item = &'a PublicationRecord>,
    calls: impl IntoIterator<Item = &'a CallRecord>,
) -> Vec<ScholarlyDocument> {
    let mut docs: Vec<ScholarlyDocument> = pubs.into_iter().map(publication_document).collect();
    docs.sort_by(|a, b| a.doc_id.cmp(&b.doc_id));
    let mut call_docs: Vec<ScholarlyDocument> = calls.into_iter().map(call_document).collect();
    call_docs.sort_by(|a, b| a.doc_id.cmp(&b.doc_id));
    docs.extend(call_docs);
    docs
}

/// Embeds the documents with `provider`, then removes the baseline component from all of them.
pub fn embed_documents(provider: &dyn EmbeddingProvider, docs: &[ScholarlyDocument]) -> Result<VectorStore> {
    let baseline = compute_baseline(provider)?;
    let vectors = embed_batch(provider, docs)?;
    let mut store = VectorStore::new(provider.model_tag(), baseline.dim());
    for v in vectors {
        store.insert(v)?;
    }
    store.debias_all(baseline)?;
    Ok(store)
}

/// The provider named by the config, or `None` for precomputed vectors.
pub fn provider_from_config(config: &PipelineConfig, base_dir: &Path) -> Result<Option<Box<dyn EmbeddingProvider>>> {
    let opts = &config.provider_options;
    match config.provider {
        ProviderKind::Hash => {
            let dim = match opts.get("dim") {
                Some(d) => d
                    .parse()
                    .map_err(|_| Error::InvalidConfig(format!("provider_options.dim {d:?}")))?,
                None => DEFAULT_HASH_DIM,
            };
            Ok(Some(Box::new(HashProvider::new(dim))))
        }
        ProviderKind::Import => Ok(None),
        ProviderKind::Sidecar => {
            let program = opts
                .get("program")
                .ok_or_else(|| Error::InvalidConfig("provider_options.program is required".into()))?;
            let model = opts.get("model").cloned().unwrap_or_else(|| "default".into());
            let args = opts
                .get("args")
                .map(|a| a.split_whitespace().map(String::from).collect::<Vec<_>>())
                .unwrap_or_default();
            Ok(Some(Box::new(
                SidecarProvider::new(resolve(base_dir, program), model).with_args(args),
            )))
        }
    }
}

fn resolve(base_dir: &Path, p: &str) -> PathBuf {
    let path = PathBuf::from(p);
    if path.is_absolute() || !base_dir.join(&path).exists() {
        path
    } else {
        base_dir.join(path)
    }
}

/// Builds the vector store for a corpus as the config's provider dictates. Imported vectors are
/// debiased here when the file carries a baseline but has not been projected yet.
pub fn embed_corpus(
    config: &PipelineConfig,
    base_dir: &Path,
    pubs: &[PublicationRecord],
    calls: &[CallRecord],
) -> Result<VectorStore> {
    match provider_from_config(config, base_dir)? {
        Some(provider) => embed_documents(provider.as_ref(), &corpus_documents(pubs, calls)),
        None => {
            let path = resolve(base_dir, &config.provider_options["path"]);
            let mut store = import_vectors(&path)?;
            if !store.is_debiased() {
                if let Some(b) = store.baseline().cloned() {
                    store.debias_all(b)?;
                } else {
                    log::warn!("{} has no baseline; vectors used without debiasing", path.display());
                }
            }
            for d in corpus_documents(pubs, calls) {
                store.require(&d.doc_id)?;
            }
            Ok(store)
        }
    }
}

/// Researchers with at least `population_min_pubs` publications inside the longest indicator
/// window ending at the reference year.
pub fn population<'a>(
    researchers: &'a [ResearcherProfile],
    pubs: &BTreeMap<String, PublicationRecord>,
    config: &PipelineConfig,
) -> Vec<&'a ResearcherProfile> {
    let from_year = config.reference_year - config.population_window() as i32 + 1;
    filter_population(researchers, pubs, config.population_min_pubs, from_year, config.reference_year)
}

/// Results of one parameterization over a corpus.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    /// Researchers passing the population filter, sorted.
    pub population: Vec<String>,
    pub scores: Vec<ScoreRow>,
    pub ranking: Ranking,
    pub analytics: Analytics,
}

/// Population filter, profiling, scoring, ranking and analytics.
pub fn run(corpus: &Corpus, config: &PipelineConfig) -> Result<RunOutput> {
    config.validate()?;
    let population = population(&corpus.researchers, &corpus.publications, config);
    let profiler = Profiler::new(&corpus.publications, &config.indicators, config.reference_year);
    let sets = profiler.build_all(&population)?;
    let call_ids = corpus.call_ids();
    let scores = score_matrix(&sets, &corpus.vectors, &call_ids, config.score_options())?;
    let names = config.indicator_names();
    let population: Vec<String> = population.iter().map(|r| r.researcher_id.clone()).collect();
    let ranking = Ranking::build(
        &scores,
        config.percentile_cutoff,
        &names,
        population.iter().cloned(),
        call_ids,
    );
    let analytics = analyze(ranking.assignments(), &names);
    Ok(RunOutput {
        population,
        scores,
        ranking,
        analytics,
    })
}

/// Identity of a published snapshot, as served by `GET /snapshot` and written to `snapshot.json`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, serde::Deserialize)]
pub struct SnapshotInfo {
    pub snapshot_id: String,
    pub config_digest: String,
    pub corpus_digest: String,
    /// Seconds since the Unix epoch.
    pub created_at: u64,
}

/// A published run. Never mutated; a recompute publishes a new one.
#[derive(Debug, Clone)]
pub struct RunSnapshot {
    pub info: SnapshotInfo,
    pub config: PipelineConfig,
    pub output: RunOutput,
}

impl RunSnapshot {
    pub fn new(sequence: u64, config: PipelineConfig, corpus_digest: String, output: RunOutput) -> RunSnapshot {
        let config_digest = config.digest();
        let created_at = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        RunSnapshot {
            info: SnapshotInfo {
                snapshot_id: format!("{sequence}-{}", &config_digest[..12]),
                config_digest,
                corpus_digest,
                created_at,
            },
            config,
            output,
        }
    }

    /// Runs `config` over `corpus` and wraps the result.
    pub fn compute(sequence: u64, corpus: &Corpus, corpus_digest: &str, config: PipelineConfig) -> Result<RunSnapshot> {
        let output = run(corpus, &config)?;
        Ok(RunSnapshot::new(sequence, config, corpus_digest.to_string(), output))
    }
}
