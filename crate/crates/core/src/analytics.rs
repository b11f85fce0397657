//! Assignment summaries, pairwise indicator overlap with rank correlation, and the
//! distribution of recommended calls per researcher.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ranking::Assignment;

/// Name of the summary row that pools every indicator.
pub const COMBINED: &str = "Combined";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndicatorSummary {
    pub indicator_name: String,
    pub researchers_assigned: usize,
    /// Assigned under this indicator and no other.
    pub unique_researchers: usize,
    pub avg_calls_per_researcher: f64,
    pub avg_researchers_per_call: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverlapCell {
    pub row_indicator: String,
    pub col_indicator: String,
    /// Share of the row indicator's (researcher, call) pairs also assigned by the column one.
    pub overlap_pct: Option<f64>,
    pub spearman_rho: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributionStats {
    pub indicator_name: String,
    pub median: Option<f64>,
    pub q1: Option<f64>,
    pub q3: Option<f64>,
    /// (calls per researcher, number of researchers), unit-width buckets.
    pub histogram: Vec<(usize, usize)>,
}

/// Contents of `analytics.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Analytics {
    pub summary: Vec<IndicatorSummary>,
    pub overlap: Vec<OverlapCell>,
    pub distributions: Vec<DistributionStats>,
}

pub fn analyze(assignments: &[Assignment], indicators: &[String]) -> Analytics {
    Analytics {
        summary: summary(assignments, indicators),
        overlap: overlap_matrix(assignments, indicators),
        distributions: indicators.iter().map(|i| distribution(assignments, i)).collect(),
    }
}

type Pair<'a> = (&'a str, &'a str);

fn pairs_by_indicator<'a>(assignments: &'a [Assignment]) -> BTreeMap<&'a str, BTreeMap<Pair<'a>, f64>> {
    let mut out: BTreeMap<&str, BTreeMap<Pair<'_>, f64>> = BTreeMap::new();
    for a in assignments {
        out.entry(a.indicator_name.as_str())
            .or_default()
            .insert((a.researcher_id.as_str(), a.call_id.as_str()), a.percentile);
    }
    out
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// One row per indicator plus a final [`COMBINED`] row over unique (researcher, call) pairs.
pub fn summary(assignments: &[Assignment], indicators: &[String]) -> Vec<IndicatorSummary> {
    let pairs = pairs_by_indicator(assignments);
    let empty = BTreeMap::new();
    let researchers_of = |ind: &str| -> BTreeSet<&str> {
        pairs.get(ind).unwrap_or(&empty).keys().map(|(r, _)| *r).collect()
    };
    let per_indicator: Vec<BTreeSet<&str>> = indicators.iter().map(|i| researchers_of(i)).collect();

    let mut rows = Vec::with_capacity(indicators.len() + 1);
    for (idx, ind) in indicators.iter().enumerate() {
        let set = pairs.get(ind.as_str()).unwrap_or(&empty);
        let researchers = &per_indicator[idx];
        let unique = researchers
            .iter()
            .filter(|r| {
                per_indicator
                    .iter()
                    .enumerate()
                    .all(|(j, other)| j == idx || !other.contains(*r))
            })
            .count();
        let calls: BTreeSet<&str> = set.keys().map(|(_, c)| *c).collect();
        rows.push(IndicatorSummary {
            indicator_name: ind.clone(),
            researchers_assigned: researchers.len(),
            unique_researchers: unique,
            avg_calls_per_researcher: ratio(set.len(), researchers.len()),
            avg_researchers_per_call: ratio(set.len(), calls.len()),
        });
    }

    let all_pairs: BTreeSet<Pair<'_>> = indicators
        .iter()
        .filter_map(|i| pairs.get(i.as_str()))
        .flat_map(|m| m.keys().copied())
        .collect();
    let researchers: BTreeSet<&str> = all_pairs.iter().map(|(r, _)| *r).collect();
    let calls: BTreeSet<&str> = all_pairs.iter().map(|(_, c)| *c).collect();
    rows.push(IndicatorSummary {
        indicator_name: COMBINED.to_string(),
        researchers_assigned: researchers.len(),
        unique_researchers: researchers.len(),
        avg_calls_per_researcher: ratio(all_pairs.len(), researchers.len()),
        avg_researchers_per_call: ratio(all_pairs.len(), calls.len()),
    });
    rows
}

/// Every ordered pair of distinct indicators. Rank correlation is computed over the pairs both
/// indicators assigned, correlating their two percentiles.
pub fn overlap_matrix(assignments: &[Assignment], indicators: &[String]) -> Vec<OverlapCell> {
    let pairs = pairs_by_indicator(assignments);
    let empty = BTreeMap::new();
    let mut cells = Vec::new();
    for row in indicators {
        for col in indicators {
            if row == col {
                continue;
            }
            let a = pairs.get(row.as_str()).unwrap_or(&empty);
            let b = pairs.get(col.as_str()).unwrap_or(&empty);
            let shared: Vec<(f64, f64)> = a
                .iter()
                .filter_map(|(k, pa)| b.get(k).map(|pb| (*pa, *pb)))
                .collect();
            let overlap_pct = (!a.is_empty()).then(|| 100.0 * shared.len() as f64 / a.len() as f64);
            let (x, y): (Vec<f64>, Vec<f64>) = shared.into_iter().unzip();
            let spearman_rho = spearman(&x, &y).ok().flatten();
            cells.push(OverlapCell {
                row_indicator: row.clone(),
                col_indicator: col.clone(),
                overlap_pct,
                spearman_rho,
            });
        }
    }
    cells
}

/// 1-based ranks; tied values get the mean of the positions they span.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&i, &j| values[i].total_cmp(&values[j]));
    let mut ranks = vec![0.0; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        // positions start+1 ..= end
        let avg = (start + 1 + end) as f64 / 2.0;
        for &i in &order[start..end] {
            ranks[i] = avg;
        }
        start = end;
    }
    ranks
}

/// Pearson correlation of the average-rank transforms. `None` with fewer than two values or
/// when either side has no rank variance.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<Option<f64>> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch(x.len(), y.len()));
    }
    if x.len() < 2 {
        return Ok(None);
    }
    let (rx, ry) = (average_ranks(x), average_ranks(y));
    let n = rx.len() as f64;
    let mx = rx.iter().sum::<f64>() / n;
    let my = ry.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in rx.iter().zip(&ry) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Ok(None);
    }
    Ok(Some((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0)))
}

/// Quantile of sorted data by linear interpolation between closest ranks, `h = (n - 1) q`.
pub fn quantile_inclusive(sorted: &[f64], q: f64) -> Option<f64> {
    if sorted.is_empty() {
        return None;
    }
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    Some(sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo]))
}

/// Calls per assigned researcher for one indicator.
pub fn distribution(assignments: &[Assignment], indicator: &str) -> DistributionStats {
    let mut per_researcher: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
    for a in assignments.iter().filter(|a| a.indicator_name == indicator) {
        per_researcher
            .entry(a.researcher_id.as_str())
            .or_default()
            .insert(a.call_id.as_str());
    }
    let counts: Vec<usize> = per_researcher.values().map(BTreeSet::len).collect();
    distribution_of_counts(indicator, &counts)
}

pub fn distribution_of_counts(indicator: &str, counts: &[usize]) -> DistributionStats {
    let mut sorted: Vec<f64> = counts.iter().map(|&c| c as f64).collect();
    sorted.sort_by(f64::total_cmp);
    let mut histogram: BTreeMap<usize, usize> = BTreeMap::new();
    for &c in counts {
        *histogram.entry(c).or_default() += 1;
    }
    DistributionStats {
        indicator_name: indicator.to_string(),
        median: quantile_inclusive(&sorted, 0.5),
        q1: quantile_inclusive(&sorted, 0.25),
        q3: quantile_inclusive(&sorted, 0.75),
        histogram: histogram.into_iter().collect(),
    }
}
