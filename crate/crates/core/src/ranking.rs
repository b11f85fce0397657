//! Institution-relative percentiles and ranks per (indicator, call), and the assignments at or
//! above the percentile cutoff.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scoring::ScoreRow;

pub const DEFAULT_PERCENTILE_CUTOFF: f64 = 95.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PercentileEntry {
    pub researcher_id: String,
    pub indicator_name: String,
    pub call_id: String,
    pub z: f64,
    /// `100 * |{z' <= z}| / N`.
    pub percentile: f64,
    /// `1 + |{z' > z}|`.
    pub rank: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assignment {
    pub researcher_id: String,
    pub indicator_name: String,
    pub call_id: String,
    pub z: f64,
    pub percentile: f64,
    pub rank: usize,
}

impl From<&PercentileEntry> for Assignment {
    fn from(e: &PercentileEntry) -> Self {
        Assignment {
            researcher_id: e.researcher_id.clone(),
            indicator_name: e.indicator_name.clone(),
            call_id: e.call_id.clone(),
            z: e.z,
            percentile: e.percentile,
            rank: e.rank,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Recommendation {
    pub call_id: String,
    pub rank: usize,
    pub percentile: f64,
}

/// Percentiles and competition ranks for the scores of one (indicator, call), best first.
/// Equal z values share rank and percentile.
pub fn percentiles(indicator: &str, call_id: &str, scores: &[(String, f64)]) -> Vec<PercentileEntry> {
    let mut sorted: Vec<&(String, f64)> = scores.iter().collect();
    sorted.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    let n = sorted.len();
    let mut out = Vec::with_capacity(n);
    let mut group_start = 0;
    for (i, (rid, z)) in sorted.iter().enumerate() {
        if i > 0 && *z != sorted[i - 1].1 {
            group_start = i;
        }
        out.push(PercentileEntry {
            researcher_id: rid.clone(),
            indicator_name: indicator.to_string(),
            call_id: call_id.to_string(),
            z: *z,
            percentile: 100.0 * (n - group_start) as f64 / n as f64,
            rank: group_start + 1,
        });
    }
    out
}

/// Entries with percentile at or above `cutoff`.
pub fn assign(entries: &[PercentileEntry], cutoff: f64) -> Vec<Assignment> {
    entries
        .iter()
        .filter(|e| e.percentile >= cutoff)
        .map(Assignment::from)
        .collect()
}

/// Rounds to two decimals, the precision used in reports.
pub fn round2(x: f64) -> f64 {
    (x * 100.0).round() / 100.0
}

/// The ranked state of one run: every percentile entry plus the assignments.
#[derive(Debug, Clone, PartialEq)]
pub struct Ranking {
    cutoff: f64,
    indicators: Vec<String>,
    calls: BTreeSet<String>,
    researchers: BTreeSet<String>,
    entries: BTreeMap<(String, String), Vec<PercentileEntry>>,
    assignments: Vec<Assignment>,
}

impl Ranking {
    /// `researchers` and `calls` are the known populations; ids outside them are reported as
    /// unknown by the lookups, ids inside them with no scores just yield empty results.
    pub fn build(
        rows: &[ScoreRow],
        cutoff: f64,
        indicators: &[String],
        researchers: impl IntoIterator<Item = String>,
        calls: impl IntoIterator<Item = String>,
    ) -> Ranking {
        let mut grouped: BTreeMap<(String, String), Vec<(String, f64)>> = BTreeMap::new();
        for r in rows {
            grouped
                .entry((r.indicator.clone(), r.call_id.clone()))
                .or_default()
                .push((r.researcher_id.clone(), r.z));
        }
        let entries: BTreeMap<(String, String), Vec<PercentileEntry>> = grouped
            .into_iter()
            .map(|((ind, call), scores)| {
                let ranked = percentiles(&ind, &call, &scores);
                ((ind, call), ranked)
            })
            .collect();
        let mut assignments: Vec<Assignment> = entries.values().flat_map(|e| assign(e, cutoff)).collect();
        sort_assignments(&mut assignments);
        Ranking {
            cutoff,
            indicators: indicators.to_vec(),
            calls: calls.into_iter().collect(),
            researchers: researchers.into_iter().collect(),
            entries,
            assignments,
        }
    }

    pub fn cutoff(&self) -> f64 {
        self.cutoff
    }

    pub fn indicators(&self) -> &[String] {
        &self.indicators
    }

    pub fn assignments(&self) -> &[Assignment] {
        &self.assignments
    }

    pub fn entries(&self) -> impl Iterator<Item = &PercentileEntry> {
        self.entries.values().flatten()
    }

    pub fn knows_researcher(&self, id: &str) -> bool {
        self.researchers.contains(id)
    }

    /// Assigned calls per indicator, highest percentile first, call_id breaking ties.
    pub fn recommend_for_researcher(&self, researcher_id: &str) -> Result<BTreeMap<String, Vec<Recommendation>>> {
        if !self.researchers.contains(researcher_id) {
            return Err(Error::UnknownResearcher(researcher_id.to_string()));
        }
        let mut out: BTreeMap<String, Vec<Recommendation>> =
            self.indicators.iter().map(|i| (i.clone(), Vec::new())).collect();
        for a in self.assignments.iter().filter(|a| a.researcher_id == researcher_id) {
            out.entry(a.indicator_name.clone()).or_default().push(Recommendation {
                call_id: a.call_id.clone(),
                rank: a.rank,
                percentile: a.percentile,
            });
        }
        for list in out.values_mut() {
            list.sort_by(|x, y| y.percentile.total_cmp(&x.percentile).then_with(|| x.call_id.cmp(&y.call_id)));
        }
        Ok(out)
    }

    /// Researchers scored for this call and indicator at or above `min_percentile`, best first.
    pub fn candidates_for_call(&self, call_id: &str, indicator: &str, min_percentile: f64) -> Result<Vec<PercentileEntry>> {
        if !self.calls.contains(call_id) {
            return Err(Error::UnknownCall(call_id.to_string()));
        }
        if !self.indicators.iter().any(|i| i == indicator) {
            return Err(Error::UnknownIndicator(indicator.to_string()));
        }
        Ok(self
            .entries
            .get(&(indicator.to_string(), call_id.to_string()))
            .map(|list| list.iter().filter(|e| e.percentile >= min_percentile).cloned().collect())
            .unwrap_or_default())
    }

    /// How many researchers were scored for each (indicator, call).
    pub fn population(&self, indicator: &str, call_id: &str) -> usize {
        self.entries
            .get(&(indicator.to_string(), call_id.to_string()))
            .map_or(0, Vec::len)
    }
}

/// Canonical `assignments.csv` order: indicator, call, rank, researcher.
pub fn sort_assignments(list: &mut [Assignment]) {
    list.sort_by(|x, y| {
        (x.indicator_name.as_str(), x.call_id.as_str(), x.rank, x.researcher_id.as_str()).cmp(&(
            y.indicator_name.as_str(),
            y.call_id.as_str(),
            y.rank,
            y.researcher_id.as_str(),
        ))
    });
}
