//! Publication-call cosine similarity, per-set aggregation and within-researcher z-scores.

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::embedding::{dot, EmbeddingVector, VectorStore};
use crate::error::{Error, Result};
use crate::profiling::PublicationSet;

/// Standard deviations below this count as zero.
pub const SIGMA_EPSILON: f64 = 1e-12;

/// Default divisor for the top-fraction rule (the top third of a set).
pub const DEFAULT_TOP_FRACTION_DENOMINATOR: usize = 3;

/// Sets whose top fraction holds at most this many publications use the full mean.
const MIN_TOP_COUNT: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AggregationRule {
    FullMean,
    TopThirdMean,
}

/// Which scores share one mean and standard deviation when computing z.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormalizationScope {
    /// One distribution per (researcher, indicator): its aggregated scores over all calls.
    #[default]
    PerIndicatorAcrossCalls,
    /// One distribution per researcher: aggregated scores over every indicator and call.
    AcrossIndicators,
    /// Raw pair similarities are standardized per (researcher, indicator) and then aggregated.
    PreAggregation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairScore {
    pub pub_id: String,
    pub call_id: String,
    pub sim: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizedScore {
    pub researcher_id: String,
    pub indicator_name: String,
    pub call_id: String,
    pub z: f64,
    pub mu_r: f64,
    pub sigma_r: f64,
}

/// One scored (researcher, indicator, call) triple; a line of `scores.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRow {
    pub researcher_id: String,
    pub indicator: String,
    pub call_id: String,
    /// Aggregated similarity.
    pub a: f64,
    pub z: f64,
    pub n_set: usize,
    pub k_used: usize,
    pub rule: AggregationRule,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ScoreOptions {
    pub top_fraction_denominator: usize,
    pub scope: NormalizationScope,
}

impl Default for ScoreOptions {
    fn default() -> Self {
        ScoreOptions {
            top_fraction_denominator: DEFAULT_TOP_FRACTION_DENOMINATOR,
            scope: NormalizationScope::default(),
        }
    }
}

fn cosine_raw(a: &[f64], b: &[f64], norm_a: f64, norm_b: f64) -> f64 {
    if norm_a == 0.0 || norm_b == 0.0 {
        return 0.0;
    }
    (dot(a, b) / (norm_a * norm_b)).clamp(-1.0, 1.0)
}

/// Cosine similarity; zero when either vector is zero.
pub fn cosine(p: &EmbeddingVector, c: &EmbeddingVector) -> Result<f64> {
    if p.dim() != c.dim() {
        return Err(Error::DimensionMismatch {
            doc_id: c.doc_id.clone(),
            expected: p.dim(),
            found: c.dim(),
        });
    }
    Ok(cosine_raw(&p.components, &c.components, p.norm(), c.norm()))
}

/// Rule and count for a set of `n_set` publications under the default top-third rule.
pub fn top_k_for(n_set: usize) -> Result<(AggregationRule, usize)> {
    top_k_with(n_set, DEFAULT_TOP_FRACTION_DENOMINATOR)
}

/// `k = ceil(n / denominator)`; when `k <= 2` the whole set is averaged instead.
pub fn top_k_with(n_set: usize, denominator: usize) -> Result<(AggregationRule, usize)> {
    if n_set == 0 {
        return Err(Error::EmptyAggregate);
    }
    if denominator < 2 {
        return Err(Error::InvalidConfig("top_fraction_denominator must be >= 2".into()));
    }
    let k = n_set.div_ceil(denominator);
    if k <= MIN_TOP_COUNT {
        Ok((AggregationRule::FullMean, n_set))
    } else {
        Ok((AggregationRule::TopThirdMean, k))
    }
}

/// Full mean, or mean of the `k` largest values (selection by value only).
pub fn aggregate(pair_sims: &[f64], rule: AggregationRule, k: usize) -> Result<f64> {
    if pair_sims.is_empty() {
        return Err(Error::EmptyAggregate);
    }
    match rule {
        AggregationRule::FullMean => Ok(pair_sims.iter().sum::<f64>() / pair_sims.len() as f64),
        AggregationRule::TopThirdMean => {
            if k == 0 || k > pair_sims.len() {
                return Err(Error::LengthMismatch(k, pair_sims.len()));
            }
            let mut sorted = pair_sims.to_vec();
            sorted.sort_by(|a, b| b.total_cmp(a));
            Ok(sorted[..k].iter().sum::<f64>() / k as f64)
        }
    }
}

/// Population mean and standard deviation.
pub fn mean_and_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (0.0, 0.0);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

fn zscore(value: f64, mean: f64, sigma: f64) -> f64 {
    if sigma < SIGMA_EPSILON {
        0.0
    } else {
        (value - mean) / sigma
    }
}

/// Standardizes one researcher's aggregated scores over calls against their own mean and
/// population standard deviation.
pub fn normalize(
    researcher_id: &str,
    indicator_name: &str,
    scores: &BTreeMap<String, f64>,
) -> BTreeMap<String, NormalizedScore> {
    let values: Vec<f64> = scores.values().copied().collect();
    let (mu, sigma) = mean_and_std(&values);
    scores
        .iter()
        .map(|(call, &a)| {
            (
                call.clone(),
                NormalizedScore {
                    researcher_id: researcher_id.to_string(),
                    indicator_name: indicator_name.to_string(),
                    call_id: call.clone(),
                    z: zscore(a, mu, sigma),
                    mu_r: mu,
                    sigma_r: sigma,
                },
            )
        })
        .collect()
}

/// Pairwise similarities of one set against the given calls, publications in pub_id order.
pub fn pair_scores(set: &PublicationSet, store: &VectorStore, call_ids: &[String]) -> Result<Vec<PairScore>> {
    let mut pubs: Vec<&String> = set.pub_ids.iter().collect();
    pubs.sort();
    let mut out = Vec::with_capacity(pubs.len() * call_ids.len());
    for p in pubs {
        let pv = store.require(p)?;
        for c in call_ids {
            out.push(PairScore {
                pub_id: p.clone(),
                call_id: c.clone(),
                sim: cosine(pv, store.require(c)?)?,
            });
        }
    }
    Ok(out)
}

/// Row-major publication x call similarity table.
struct SimTable {
    pub_index: BTreeMap<String, usize>,
    n_calls: usize,
    sims: Vec<f64>,
}

impl SimTable {
    fn build(pub_ids: &BTreeSet<&str>, call_ids: &[&str], store: &VectorStore) -> Result<SimTable> {
        let pub_vecs: Vec<&EmbeddingVector> = pub_ids
            .iter()
            .map(|id| store.require(id))
            .collect::<Result<_>>()?;
        let call_vecs: Vec<&EmbeddingVector> = call_ids
            .iter()
            .map(|id| store.require(id))
            .collect::<Result<_>>()?;
        let call_norms: Vec<f64> = call_vecs.iter().map(|v| v.norm()).collect();
        let n_calls = call_ids.len();
        let mut sims = vec![0.0; pub_vecs.len() * n_calls];
        if n_calls > 0 {
            sims.par_chunks_mut(n_calls)
                .zip(pub_vecs.par_iter())
                .for_each(|(row, p)| {
                    let pn = p.norm();
                    for ((out, c), cn) in row.iter_mut().zip(&call_vecs).zip(&call_norms) {
                        *out = cosine_raw(&p.components, &c.components, pn, *cn);
                    }
                });
        }
        Ok(SimTable {
            pub_index: pub_ids.iter().enumerate().map(|(i, id)| (id.to_string(), i)).collect(),
            n_calls,
            sims,
        })
    }

    fn row(&self, pub_id: &str) -> &[f64] {
        let i = self.pub_index[pub_id];
        &self.sims[i * self.n_calls..(i + 1) * self.n_calls]
    }
}

struct SetScores<'a> {
    set: &'a PublicationSet,
    rule: AggregationRule,
    k: usize,
    a: Vec<f64>,
    z: Vec<f64>,
}

/// Scores every eligible set against every call.
///
/// Output is sorted by indicator, call_id, z descending, then researcher_id, and does not
/// depend on input order or thread count.
pub fn score_matrix(
    sets: &[PublicationSet],
    store: &VectorStore,
    call_ids: &[String],
    options: ScoreOptions,
) -> Result<Vec<ScoreRow>> {
    let calls: Vec<&str> = call_ids
        .iter()
        .map(String::as_str)
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let mut eligible: Vec<&PublicationSet> = sets.iter().filter(|s| s.eligible && !s.pub_ids.is_empty()).collect();
    eligible.sort_by(|a, b| {
        (a.researcher_id.as_str(), a.indicator_name.as_str()).cmp(&(b.researcher_id.as_str(), b.indicator_name.as_str()))
    });
    if calls.is_empty() || eligible.is_empty() {
        return Ok(Vec::new());
    }
    let pub_ids: BTreeSet<&str> = eligible
        .iter()
        .flat_map(|s| s.pub_ids.iter().map(String::as_str))
        .collect();
    let table = SimTable::build(&pub_ids, &calls, store)?;

    let mut scored: Vec<SetScores<'_>> = eligible
        .par_iter()
        .map(|set| score_set(set, &table, calls.len(), options))
        .collect::<Result<_>>()?;

    if options.scope == NormalizationScope::AcrossIndicators {
        let mut by_researcher: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
        for (i, s) in scored.iter().enumerate() {
            by_researcher.entry(&s.set.researcher_id).or_default().push(i);
        }
        for idxs in by_researcher.values() {
            let all: Vec<f64> = idxs.iter().flat_map(|&i| scored[i].a.iter().copied()).collect();
            let (mu, sigma) = mean_and_std(&all);
            for &i in idxs {
                let z = scored[i].a.iter().map(|&a| zscore(a, mu, sigma)).collect();
                scored[i].z = z;
            }
        }
    }

    let mut rows: Vec<ScoreRow> = scored
        .into_iter()
        .flat_map(|s| {
            let n_set = s.set.pub_ids.len();
            calls
                .iter()
                .enumerate()
                .map(move |(j, c)| ScoreRow {
                    researcher_id: s.set.researcher_id.clone(),
                    indicator: s.set.indicator_name.clone(),
                    call_id: c.to_string(),
                    a: s.a[j],
                    z: s.z[j],
                    n_set,
                    k_used: s.k,
                    rule: s.rule,
                })
                .collect::<Vec<_>>()
        })
        .collect();
    sort_scores(&mut rows);
    Ok(rows)
}

/// Canonical `scores.jsonl` order.
pub fn sort_scores(rows: &mut [ScoreRow]) {
    rows.sort_by(|x, y| {
        x.indicator
            .cmp(&y.indicator)
            .then_with(|| x.call_id.cmp(&y.call_id))
            .then_with(|| y.z.total_cmp(&x.z))
            .then_with(|| x.researcher_id.cmp(&y.researcher_id))
    });
}

fn score_set<'a>(
    set: &'a PublicationSet,
    table: &SimTable,
    n_calls: usize,
    options: ScoreOptions,
) -> Result<SetScores<'a>> {
    let (rule, k) = top_k_with(set.pub_ids.len(), options.top_fraction_denominator)?;
    let mut pubs: Vec<&str> = set.pub_ids.iter().map(String::as_str).collect();
    pubs.sort_unstable();
    let rows: Vec<&[f64]> = pubs.iter().map(|p| table.row(p)).collect();

    let pre = options.scope == NormalizationScope::PreAggregation;
    let (mu, sigma) = if pre {
        let all: Vec<f64> = rows.iter().flat_map(|r| r.iter().copied()).collect();
        mean_and_std(&all)
    } else {
        (0.0, 0.0)
    };

    let mut column = vec![0.0; rows.len()];
    let mut a = Vec::with_capacity(n_calls);
    let mut z_pre = Vec::with_capacity(if pre { n_calls } else { 0 });
    for j in 0..n_calls {
        for (slot, r) in column.iter_mut().zip(&rows) {
            *slot = r[j];
        }
        a.push(aggregate(&column, rule, k)?);
        if pre {
            for v in column.iter_mut() {
                *v = zscore(*v, mu, sigma);
            }
            z_pre.push(aggregate(&column, rule, k)?);
        }
    }
    let z = if pre {
        z_pre
    } else {
        let (mu, sigma) = mean_and_std(&a);
        a.iter().map(|&v| zscore(v, mu, sigma)).collect()
    };
    Ok(SetScores { set, rule, k, a, z })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn v(id: &str, c: &[f64]) -> EmbeddingVector {
        EmbeddingVector::new(id, "m", c.to_vec())
    }

    #[test]
    fn cosine_examples() {
        assert!((cosine(&v("a", &[0.3, -2.0]), &v("b", &[0.3, -2.0])).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(cosine(&v("a", &[1.0, 0.0]), &v("b", &[0.0, 1.0])).unwrap(), 0.0);
        let s = cosine(&v("a", &[1.0, 0.0]), &v("b", &[1.0, 1.0])).unwrap();
        assert!((s - 0.70710678).abs() < 1e-8);
        assert_eq!(cosine(&v("a", &[0.0, 0.0]), &v("b", &[1.0, 1.0])).unwrap(), 0.0);
        assert!(cosine(&v("a", &[1.0]), &v("b", &[1.0, 1.0])).is_err());
    }

    #[test]
    fn top_k_boundary() {
        assert_eq!(top_k_for(6).unwrap(), (AggregationRule::FullMean, 6));
        assert_eq!(top_k_for(7).unwrap(), (AggregationRule::TopThirdMean, 3));
        assert_eq!(top_k_for(1).unwrap(), (AggregationRule::FullMean, 1));
        assert!(top_k_for(0).is_err());
        assert!(top_k_with(5, 1).is_err());
    }

    #[test]
    fn aggregate_examples() {
        let sims = [0.9, 0.8, 0.7, 0.6, 0.5, 0.4, 0.3];
        let top = aggregate(&sims, AggregationRule::TopThirdMean, 3).unwrap();
        assert!((top - 0.8).abs() < 1e-12);
        let mean = aggregate(&[0.2, 0.4, 0.6], AggregationRule::FullMean, 3).unwrap();
        assert!((mean - 0.4).abs() < 1e-12);
        assert_eq!(aggregate(&[0.37], AggregationRule::FullMean, 1).unwrap(), 0.37);
        assert!(matches!(aggregate(&[], AggregationRule::FullMean, 0), Err(Error::EmptyAggregate)));
        assert!(aggregate(&[0.1], AggregationRule::TopThirdMean, 2).is_err());
    }

    #[test]
    fn ties_are_selected_by_value() {
        let top = aggregate(&[0.5, 0.9, 0.5, 0.5, 0.1], AggregationRule::TopThirdMean, 2).unwrap();
        assert!((top - 0.7).abs() < 1e-12);
    }

    #[test]
    fn normalize_examples() {
        let scores: BTreeMap<String, f64> =
            [("c1", 0.2), ("c2", 0.4), ("c3", 0.6)].iter().map(|(k, v)| (k.to_string(), *v)).collect();
        let z = normalize("r", "s", &scores);
        let expected = [-1.22474487, 0.0, 1.22474487];
        for (got, want) in z.values().zip(expected) {
            assert!((got.z - want).abs() < 1e-6, "{} vs {want}", got.z);
        }
        assert!((z["c1"].sigma_r - (0.08f64 / 3.0).sqrt()).abs() < 1e-12);

        let flat: BTreeMap<String, f64> = [("a", 0.3), ("b", 0.3)].iter().map(|(k, v)| (k.to_string(), *v)).collect();
        assert!(normalize("r", "s", &flat).values().all(|n| n.z == 0.0));
        let single: BTreeMap<String, f64> = [("a".to_string(), 0.9)].into_iter().collect();
        assert_eq!(normalize("r", "s", &single)["a"].z, 0.0);
    }

    fn store(vectors: &[(&str, Vec<f64>)]) -> VectorStore {
        let dim = vectors[0].1.len();
        let mut s = VectorStore::new("m", dim);
        for (id, c) in vectors {
            s.insert(v(id, c)).unwrap();
        }
        s
    }

    fn set(r: &str, ind: &str, pubs: &[&str], eligible: bool) -> PublicationSet {
        PublicationSet {
            researcher_id: r.into(),
            indicator_name: ind.into(),
            pub_ids: pubs.iter().map(|s| s.to_string()).collect(),
            eligible,
        }
    }

    #[test]
    fn score_matrix_edge_cases() {
        let s = store(&[("p1", vec![1.0, 0.0]), ("c1", vec![1.0, 1.0])]);
        let calls = vec!["c1".to_string()];
        assert!(score_matrix(&[set("r", "x", &["p1"], false)], &s, &calls, ScoreOptions::default())
            .unwrap()
            .is_empty());
        assert!(score_matrix(&[set("r", "x", &["p1"], true)], &s, &[], ScoreOptions::default())
            .unwrap()
            .is_empty());
        let err = score_matrix(&[set("r", "x", &["p9"], true)], &s, &calls, ScoreOptions::default()).unwrap_err();
        assert!(matches!(err, Error::MissingVector(id) if id == "p9"));
    }

    #[test]
    fn pre_aggregation_and_joint_scopes() {
        let s = store(&[
            ("p1", vec![1.0, 0.0, 0.0]),
            ("p2", vec![0.0, 1.0, 0.0]),
            ("c1", vec![1.0, 0.2, 0.0]),
            ("c2", vec![0.1, 1.0, 0.3]),
            ("c3", vec![0.0, 0.0, 1.0]),
        ]);
        let calls: Vec<String> = ["c1", "c2", "c3"].iter().map(|s| s.to_string()).collect();
        let sets = [set("r", "x", &["p1", "p2"], true), set("r", "y", &["p1"], true)];
        for scope in [
            NormalizationScope::PerIndicatorAcrossCalls,
            NormalizationScope::AcrossIndicators,
            NormalizationScope::PreAggregation,
        ] {
            let rows = score_matrix(&sets, &s, &calls, ScoreOptions { top_fraction_denominator: 3, scope }).unwrap();
            assert_eq!(rows.len(), 6);
            // Naive check of the chosen scope.
            let sim = |p: &str, c: &str| cosine(s.get(p).unwrap(), s.get(c).unwrap()).unwrap();
            let a_x: Vec<f64> = calls.iter().map(|c| (sim("p1", c) + sim("p2", c)) / 2.0).collect();
            let a_y: Vec<f64> = calls.iter().map(|c| sim("p1", c)).collect();
            let expected_x: Vec<f64> = match scope {
                NormalizationScope::PerIndicatorAcrossCalls => {
                    let (m, sd) = mean_and_std(&a_x);
                    a_x.iter().map(|a| (a - m) / sd).collect()
                }
                NormalizationScope::AcrossIndicators => {
                    let all: Vec<f64> = a_x.iter().chain(&a_y).copied().collect();
                    let (m, sd) = mean_and_std(&all);
                    a_x.iter().map(|a| (a - m) / sd).collect()
                }
                NormalizationScope::PreAggregation => {
                    let raw: Vec<f64> = ["p1", "p2"].iter().flat_map(|p| calls.iter().map(move |c| (p, c))).map(|(p, c)| sim(p, c)).collect();
                    let (m, sd) = mean_and_std(&raw);
                    calls.iter().map(|c| ((sim("p1", c) - m) / sd + (sim("p2", c) - m) / sd) / 2.0).collect()
                }
            };
            for (c, want) in calls.iter().zip(expected_x) {
                let got = rows.iter().find(|r| r.indicator == "x" && &r.call_id == c).unwrap();
                assert!((got.z - want).abs() < 1e-12, "{scope:?} {c}: {} vs {want}", got.z);
            }
        }
    }

    proptest! {
        #[test]
        fn top_mean_monotone(mut sims in prop::collection::vec(-1.0f64..1.0, 7..20), bump in 0.0f64..0.5, pick in 0usize..20) {
            let (rule, k) = top_k_for(sims.len()).unwrap();
            prop_assert_eq!(rule, AggregationRule::TopThirdMean);
            let before = aggregate(&sims, rule, k).unwrap();
            let mut order: Vec<usize> = (0..sims.len()).collect();
            order.sort_by(|&i, &j| sims[j].total_cmp(&sims[i]));
            let idx = order[pick % sims.len()];
            let in_top = order[..k].contains(&idx);
            let kth = sims[order[k - 1]];
            let raised = sims[idx] + bump;
            sims[idx] = raised;
            let after = aggregate(&sims, rule, k).unwrap();
            prop_assert!(after >= before - 1e-12);
            if !in_top && raised < kth {
                prop_assert!((after - before).abs() < 1e-12);
            }
        }

        #[test]
        fn z_has_zero_mean_unit_std(a in prop::collection::vec(-1.0f64..1.0, 2..40)) {
            let scores: BTreeMap<String, f64> = a.iter().enumerate().map(|(i, v)| (format!("c{i:03}"), *v)).collect();
            let z: Vec<f64> = normalize("r", "s", &scores).values().map(|n| n.z).collect();
            let (m, sd) = mean_and_std(&z);
            let (_, sigma) = mean_and_std(&a);
            if sigma >= SIGMA_EPSILON {
                prop_assert!(m.abs() <= 1e-9);
                prop_assert!((sd - 1.0).abs() <= 1e-9);
            } else {
                prop_assert!(z.iter().all(|v| *v == 0.0));
            }
        }
    }
}
