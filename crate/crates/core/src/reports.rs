//! Report files. Every writer emits rows in a fixed canonical order so that two runs on the same
//! inputs produce identical bytes.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use crate::analytics::Analytics;
use crate::corpus::{write_jsonl, Reject};
use crate::error::{Error, Result};
use crate::ranking::{round2, Assignment, Ranking};
use crate::scoring::ScoreRow;

pub const PUBLICATIONS_FILE: &str = "publications.jsonl";
pub const CALLS_FILE: &str = "calls.jsonl";
pub const MASTERS_FILE: &str = "masters.jsonl";
pub const PROFILES_FILE: &str = "author_profiles.jsonl";
pub const REJECTS_FILE: &str = "rejects.jsonl";
pub const RESEARCHERS_FILE: &str = "researchers.jsonl";
pub const UNMATCHED_FILE: &str = "unmatched.jsonl";
pub const VECTORS_FILE: &str = "vectors.jsonl";
pub const SCORES_FILE: &str = "scores.jsonl";
pub const ASSIGNMENTS_FILE: &str = "assignments.csv";
pub const RECOMMENDATIONS_FILE: &str = "recommendations.csv";
pub const ANALYTICS_FILE: &str = "analytics.json";
pub const SNAPSHOT_FILE: &str = "snapshot.json";

/// A line of `rejects.jsonl`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, serde::Deserialize)]
pub struct RejectRow {
    pub file: String,
    pub line: usize,
    pub original: String,
    pub reason: String,
}

impl RejectRow {
    pub fn new(file: &str, reject: &Reject) -> Self {
        RejectRow {
            file: file.to_string(),
            line: reject.line,
            original: reject.original.clone(),
            reason: reject.reason.clone(),
        }
    }
}

pub fn write_rejects(path: &Path, rows: &[RejectRow]) -> Result<()> {
    write_jsonl(path, rows)
}

/// `scores.jsonl`, re-sorted into the canonical order.
pub fn write_scores(path: &Path, rows: &[ScoreRow]) -> Result<()> {
    let mut sorted = rows.to_vec();
    crate::scoring::sort_scores(&mut sorted);
    write_jsonl(path, &sorted)
}

fn csv_writer(path: &Path) -> Result<csv::Writer<File>> {
    csv::Writer::from_path(path).map_err(|e| csv_err(path, e))
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Parse {
            path: path.to_path_buf(),
            line: 0,
            message: format!("{other:?}"),
        },
    }
}

fn pct(x: f64) -> String {
    format!("{:.2}", round2(x))
}

/// `assignments.csv`: indicator, call_id, researcher_id, z, percentile, rank.
pub fn write_assignments(path: &Path, assignments: &[Assignment]) -> Result<()> {
    let mut sorted = assignments.to_vec();
    crate::ranking::sort_assignments(&mut sorted);
    let mut w = csv_writer(path)?;
    w.write_record(["indicator", "call_id", "researcher_id", "z", "percentile", "rank"])
        .map_err(|e| csv_err(path, e))?;
    for a in &sorted {
        w.write_record([
            a.indicator_name.as_str(),
            a.call_id.as_str(),
            a.researcher_id.as_str(),
            &a.z.to_string(),
            &pct(a.percentile),
            &a.rank.to_string(),
        ])
        .map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// `recommendations.csv`: per researcher and indicator, assigned calls from the highest
/// percentile down.
pub fn write_recommendations(path: &Path, ranking: &Ranking) -> Result<()> {
    let mut researchers: Vec<&str> = ranking
        .assignments()
        .iter()
        .map(|a| a.researcher_id.as_str())
        .collect();
    researchers.sort_unstable();
    researchers.dedup();
    let mut w = csv_writer(path)?;
    w.write_record(["researcher_id", "indicator", "call_id", "rank", "percentile"])
        .map_err(|e| csv_err(path, e))?;
    for rid in researchers {
        let by_indicator = ranking.recommend_for_researcher(rid)?;
        for indicator in ranking.indicators() {
            for r in by_indicator.get(indicator).into_iter().flatten() {
                w.write_record([rid, indicator.as_str(), r.call_id.as_str(), &r.rank.to_string(), &pct(r.percentile)])
                    .map_err(|e| csv_err(path, e))?;
            }
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Pretty JSON followed by a newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| Error::io(path, e.into()))?;
    w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_analytics(path: &Path, analytics: &Analytics) -> Result<()> {
    write_json(path, analytics)
}
