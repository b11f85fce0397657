//! File-to-file pipeline stages over a work directory. Each stage reads the files earlier
//! stages wrote there and writes its own; `report` does scoring, ranking and analytics in one go.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::analytics::analyze;
use crate::config::PipelineConfig;
use crate::corpus::{
    enrich_topics, ingest_author_profiles, ingest_calls, ingest_master_list, ingest_publications,
    read_jsonl_strict, resolve_identities, write_jsonl, CallRecord, Format, MasterRecord,
    PublicationRecord, Resolution, ResearcherProfile, SourceAuthorProfile,
};
use crate::embedding::export_vectors;
use crate::error::{Error, Result};
use crate::pipeline::{embed_corpus, population, Corpus, RunSnapshot};
use crate::ranking::Ranking;
use crate::reports::*;
use crate::scoring::ScoreRow;

#[derive(Debug, Clone, Default)]
pub struct IngestInputs {
    pub publications: PathBuf,
    pub calls: PathBuf,
    pub masters: PathBuf,
    pub profiles: PathBuf,
    pub topics: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, serde::Serialize)]
pub struct IngestSummary {
    pub publications: usize,
    pub calls: usize,
    pub masters: usize,
    pub profiles: usize,
    pub topics_enriched: usize,
    pub rejects: usize,
}

fn file_label(path: &Path) -> String {
    path.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// Validates the raw inputs and writes canonical JSONL copies plus `rejects.jsonl`.
pub fn ingest(inputs: &IngestInputs, work: &Path, reference_year: i32) -> Result<IngestSummary> {
    ensure_dir(work)?;
    let mut rejects = Vec::new();

    let pubs = ingest_publications(&inputs.publications, Format::from_path(&inputs.publications)?, reference_year)?;
    rejects.extend(pubs.rejects.iter().map(|r| RejectRow::new(&file_label(&inputs.publications), r)));
    let mut publications = pubs.records;
    let topics_enriched = match &inputs.topics {
        Some(t) => enrich_topics(&mut publications, t)?,
        None => 0,
    };
    publications.sort_by(|a, b| a.pub_id.cmp(&b.pub_id));

    let calls = ingest_calls(&inputs.calls, Format::from_path(&inputs.calls)?)?;
    rejects.extend(calls.rejects.iter().map(|r| RejectRow::new(&file_label(&inputs.calls), r)));
    let mut call_records = calls.records;
    call_records.sort_by(|a, b| a.call_id.cmp(&b.call_id));

    let masters = ingest_master_list(&inputs.masters, Format::from_path(&inputs.masters)?)?;
    rejects.extend(masters.rejects.iter().map(|r| RejectRow::new(&file_label(&inputs.masters), r)));
    let mut master_records = masters.records;
    master_records.sort_by(|a, b| a.researcher_key.cmp(&b.researcher_key));

    let profiles = ingest_author_profiles(&inputs.profiles)?;
    rejects.extend(profiles.rejects.iter().map(|r| RejectRow::new(&file_label(&inputs.profiles), r)));
    let mut profile_records = profiles.records;
    profile_records.sort_by(|a, b| a.source_author_id.cmp(&b.source_author_id));

    write_jsonl(&work.join(PUBLICATIONS_FILE), &publications)?;
    write_jsonl(&work.join(CALLS_FILE), &call_records)?;
    write_jsonl(&work.join(MASTERS_FILE), &master_records)?;
    write_jsonl(&work.join(PROFILES_FILE), &profile_records)?;
    write_rejects(&work.join(REJECTS_FILE), &rejects)?;
    Ok(IngestSummary {
        publications: publications.len(),
        calls: call_records.len(),
        masters: master_records.len(),
        profiles: profile_records.len(),
        topics_enriched,
        rejects: rejects.len(),
    })
}

/// Writes `researchers.jsonl` and `unmatched.jsonl`.
pub fn resolve(work: &Path) -> Result<Resolution> {
    let masters: Vec<MasterRecord> = read_jsonl_strict(&work.join(MASTERS_FILE))?;
    let profiles: Vec<SourceAuthorProfile> = read_jsonl_strict(&work.join(PROFILES_FILE))?;
    let pubs: Vec<PublicationRecord> = read_jsonl_strict(&work.join(PUBLICATIONS_FILE))?;
    let resolution = resolve_identities(&masters, &profiles, &pubs)?;
    write_jsonl(&work.join(RESEARCHERS_FILE), &resolution.researchers)?;
    let unmatched: Vec<serde_json::Value> = resolution
        .unmatched_source_ids
        .iter()
        .map(|id| serde_json::json!({ "source_author_id": id }))
        .collect();
    write_jsonl(&work.join(UNMATCHED_FILE), &unmatched)?;
    Ok(resolution)
}

/// Embeds every publication and call and writes the debiased `vectors.jsonl`. Relative paths
/// in provider options are resolved against `config_dir` first.
pub fn embed(work: &Path, config: &PipelineConfig, config_dir: &Path) -> Result<usize> {
    let pubs: Vec<PublicationRecord> = read_jsonl_strict(&work.join(PUBLICATIONS_FILE))?;
    let calls: Vec<CallRecord> = read_jsonl_strict(&work.join(CALLS_FILE))?;
    let store = embed_corpus(config, config_dir, &pubs, &calls)?;
    export_vectors(&store, &work.join(VECTORS_FILE))?;
    Ok(store.len())
}

/// Full run over the work directory; writes `scores.jsonl` only.
pub fn score(work: &Path, config: &PipelineConfig) -> Result<Vec<ScoreRow>> {
    let corpus = Corpus::load(work)?;
    let out = crate::pipeline::run(&corpus, config)?;
    write_scores(&work.join(SCORES_FILE), &out.scores)?;
    Ok(out.scores)
}

/// Ranks the scores in `scores.jsonl` against the current population.
fn load_ranking(work: &Path, config: &PipelineConfig) -> Result<Ranking> {
    config.validate()?;
    let scores: Vec<ScoreRow> = read_jsonl_strict(&work.join(SCORES_FILE))?;
    let pubs: BTreeMap<String, PublicationRecord> = read_jsonl_strict::<PublicationRecord>(&work.join(PUBLICATIONS_FILE))?
        .into_iter()
        .map(|p| (p.pub_id.clone(), p))
        .collect();
    let researchers: Vec<ResearcherProfile> = read_jsonl_strict(&work.join(RESEARCHERS_FILE))?;
    let calls: Vec<CallRecord> = read_jsonl_strict(&work.join(CALLS_FILE))?;
    let pop: Vec<String> = population(&researchers, &pubs, config)
        .into_iter()
        .map(|r| r.researcher_id.clone())
        .collect();
    Ok(Ranking::build(
        &scores,
        config.percentile_cutoff,
        &config.indicator_names(),
        pop,
        calls.into_iter().map(|c| c.call_id),
    ))
}

/// Writes `assignments.csv` and `recommendations.csv` from `scores.jsonl`.
pub fn rank(work: &Path, config: &PipelineConfig) -> Result<usize> {
    let ranking = load_ranking(work, config)?;
    write_assignments(&work.join(ASSIGNMENTS_FILE), ranking.assignments())?;
    write_recommendations(&work.join(RECOMMENDATIONS_FILE), &ranking)?;
    Ok(ranking.assignments().len())
}

/// Writes `analytics.json` from `scores.jsonl`.
pub fn analyze_scores(work: &Path, config: &PipelineConfig) -> Result<crate::analytics::Analytics> {
    let ranking = load_ranking(work, config)?;
    let analytics = analyze(ranking.assignments(), &config.indicator_names());
    write_analytics(&work.join(ANALYTICS_FILE), &analytics)?;
    Ok(analytics)
}

/// Runs scoring, ranking and analytics on the work directory and writes every report plus
/// `snapshot.json` into `out`.
pub fn report(work: &Path, out: &Path, config: &PipelineConfig) -> Result<RunSnapshot> {
    let corpus = Corpus::load(work)?;
    let snapshot = RunSnapshot::compute(1, &corpus, &corpus.digest(), config.clone())?;
    ensure_dir(out)?;
    write_snapshot_reports(out, &snapshot)?;
    Ok(snapshot)
}

pub fn write_snapshot_reports(out: &Path, snapshot: &RunSnapshot) -> Result<()> {
    let o = &snapshot.output;
    write_scores(&out.join(SCORES_FILE), &o.scores)?;
    write_assignments(&out.join(ASSIGNMENTS_FILE), o.ranking.assignments())?;
    write_recommendations(&out.join(RECOMMENDATIONS_FILE), &o.ranking)?;
    write_analytics(&out.join(ANALYTICS_FILE), &o.analytics)?;
    write_json(&out.join(SNAPSHOT_FILE), &snapshot.info)
}
