//! Brute-force reference for the fixture: reads the raw fixture files and the resolved
//! researchers, and recomputes documents, hash vectors, publication sets, pair similarities,
//! aggregation, z, percentiles, assignments and analytics with plain loops. Shares no code
//! with the engine beyond the record types used for parsing.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use fundmatch_core::corpus::ResearcherProfile;
use fundmatch_core::profiling::AuthorFilter;
use fundmatch_core::PipelineConfig;
use serde_json::{json, Value};

struct Pub {
    id: String,
    year: i64,
    title: String,
    body: String,
    keywords: Vec<String>,
    /// (source id, position, corresponding)
    authors: Vec<(String, u64, bool)>,
}

fn lines(path: &Path) -> Vec<Value> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

fn strs(v: &Value) -> Vec<String> {
    v.as_array()
        .map(|a| a.iter().map(|s| s.as_str().unwrap().to_string()).collect())
        .unwrap_or_default()
}

fn dedup_ci(terms: Vec<String>) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for t in terms {
        let t = t.trim().to_string();
        if !t.is_empty() && !out.iter().any(|o| o.to_lowercase() == t.to_lowercase()) {
            out.push(t);
        }
    }
    out
}

fn load_pubs(dir: &Path) -> Vec<Pub> {
    let mut topics: BTreeMap<String, Vec<String>> = BTreeMap::new();
    for (i, line) in std::fs::read_to_string(dir.join("topics.csv")).unwrap().lines().enumerate() {
        if i == 0 {
            continue;
        }
        let (doi, topic) = line.split_once(',').unwrap();
        topics.entry(doi.to_lowercase()).or_default().push(topic.to_string());
    }
    lines(&dir.join("publications.jsonl"))
        .into_iter()
        .filter(|p| !p["title"].as_str().unwrap().trim().is_empty())
        .map(|p| {
            let mut kw = strs(&p["keywords"]);
            kw.extend(strs(&p["topics"]));
            if let Some(doi) = p["doi"].as_str() {
                kw.extend(topics.get(&doi.to_lowercase()).cloned().unwrap_or_default());
            }
            Pub {
                id: p["pub_id"].as_str().unwrap().to_string(),
                year: p["year"].as_i64().unwrap(),
                title: p["title"].as_str().unwrap().to_string(),
                body: p["abstract"].as_str().unwrap_or("").to_string(),
                keywords: dedup_ci(kw),
                authors: p["authors"]
                    .as_array()
                    .unwrap()
                    .iter()
                    .map(|a| {
                        (
                            a["source_author_id"].as_str().unwrap().to_string(),
                            a["position"].as_u64().unwrap(),
                            a["is_corresponding"].as_bool().unwrap(),
                        )
                    })
                    .collect(),
            }
        })
        .collect()
}

fn part_rank(label: &str) -> usize {
    match label.trim().to_lowercase().as_str() {
        "description" => 0,
        "destination" => 1,
        "expected outcome" | "expected outcomes" => 2,
        "scope" => 3,
        _ => 4,
    }
}

/// (call_id, title, body, keywords), sorted by call_id.
fn load_calls(dir: &Path) -> Vec<(String, String, String, Vec<String>)> {
    let mut calls: Vec<_> = lines(&dir.join("calls.jsonl"))
        .into_iter()
        .map(|c| {
            let mut parts: Vec<(usize, String)> = c["parts"]
                .as_array()
                .unwrap()
                .iter()
                .map(|p| (part_rank(p["label"].as_str().unwrap()), p["text"].as_str().unwrap().to_string()))
                .collect();
            parts.sort_by_key(|p| p.0);
            let body = parts.into_iter().map(|p| p.1).collect::<Vec<_>>().join("\n\n");
            (
                c["call_id"].as_str().unwrap().to_string(),
                c["title"].as_str().unwrap().to_string(),
                body,
                dedup_ci(strs(&c["terms"])),
            )
        })
        .collect();
    calls.sort();
    calls
}

fn fnv(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

fn embed(title: &str, body: &str, keywords: &[String], dim: usize) -> Vec<f64> {
    let mut v = vec![0.0; dim];
    let mut add = |text: &str, w: f64| {
        let mut token = String::new();
        for ch in text.chars().chain(std::iter::once(' ')) {
            if ch.is_alphanumeric() {
                token.push(ch);
            } else if !token.is_empty() {
                let t = token.to_lowercase();
                v[(fnv(t.as_bytes()) % dim as u64) as usize] += w;
                token.clear();
            }
        }
    };
    add(title, 2.0);
    add(body, 1.0);
    for k in keywords {
        add(k, 1.0);
    }
    let n: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
    v
}

fn project_out(v: &[f64], b: &[f64]) -> Vec<f64> {
    let bb: f64 = b.iter().map(|x| x * x).sum();
    if bb == 0.0 {
        return v.to_vec();
    }
    let s: f64 = v.iter().zip(b).map(|(x, y)| x * y).sum::<f64>() / bb;
    v.iter().zip(b).map(|(x, y)| x - s * y).collect()
}

fn cos(a: &[f64], b: &[f64]) -> f64 {
    let d: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        (d / (na * nb)).clamp(-1.0, 1.0)
    }
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

pub fn average_rank(xs: &[f64], i: usize) -> f64 {
    let less = xs.iter().filter(|&&x| x < xs[i]).count() as f64;
    let equal = xs.iter().filter(|&&x| x == xs[i]).count() as f64;
    less + (equal + 1.0) / 2.0
}

pub fn spearman(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() < 2 {
        return None;
    }
    let rx: Vec<f64> = (0..x.len()).map(|i| average_rank(x, i)).collect();
    let ry: Vec<f64> = (0..y.len()).map(|i| average_rank(y, i)).collect();
    let (mx, my) = (mean(&rx), mean(&ry));
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
    if vx == 0.0 || vy == 0.0 {
        None
    } else {
        Some((cov / (vx * vy).sqrt()).clamp(-1.0, 1.0))
    }
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[h.ceil() as usize] - sorted[lo])
}

/// Writes oracle versions of scores.jsonl, assignments.csv and analytics.json into `out`.
pub fn run(fixture: &Path, researchers: &[ResearcherProfile], config: &PipelineConfig, out: &Path) {
    let dim: usize = config.provider_options["dim"].parse().unwrap();
    let pubs = load_pubs(fixture);
    let calls = load_calls(fixture);
    let baseline = embed("", "", &[], dim);
    let pvec: BTreeMap<&str, Vec<f64>> = pubs
        .iter()
        .map(|p| (p.id.as_str(), project_out(&embed(&p.title, &p.body, &p.keywords, dim), &baseline)))
        .collect();
    let cvec: Vec<Vec<f64>> = calls
        .iter()
        .map(|(_, t, b, k)| project_out(&embed(t, b, k, dim), &baseline))
        .collect();

    let ref_year = config.reference_year as i64;
    let max_window = config.indicators.iter().map(|i| i.window_years).max().unwrap() as i64;
    let authored = |r: &ResearcherProfile, p: &Pub| p.authors.iter().any(|a| r.merged_source_ids.contains(&a.0));
    let leading = |r: &ResearcherProfile, p: &Pub| {
        let last = p.authors.len() as u64;
        p.authors
            .iter()
            .any(|a| r.merged_source_ids.contains(&a.0) && (a.1 == 1 || a.1 == last || a.2))
    };

    // (indicator, call, researcher) -> (a, z, n, k, rule)
    let mut rows: Vec<(String, String, String, f64, f64, usize, usize, &str)> = Vec::new();
    for r in researchers {
        let in_pop = pubs
            .iter()
            .filter(|p| authored(r, p) && p.year > ref_year - max_window && p.year <= ref_year)
            .count();
        if in_pop < config.population_min_pubs {
            continue;
        }
        for ind in &config.indicators {
            let set: Vec<&Pub> = pubs
                .iter()
                .filter(|p| authored(r, p) && p.year > ref_year - ind.window_years as i64 && p.year <= ref_year)
                .filter(|p| ind.author_filter == AuthorFilter::All || leading(r, p))
                .collect();
            if set.len() < ind.min_pubs || set.is_empty() {
                continue;
            }
            let n = set.len();
            let k = n.div_ceil(config.top_fraction_denominator);
            let (rule, k) = if k <= 2 { ("full_mean", n) } else { ("top_third_mean", k) };
            let a: Vec<f64> = cvec
                .iter()
                .map(|c| {
                    let mut sims: Vec<f64> = set.iter().map(|p| cos(&pvec[p.id.as_str()], c)).collect();
                    sims.sort_by(|x, y| y.partial_cmp(x).unwrap());
                    mean(&sims[..k])
                })
                .collect();
            let mu = mean(&a);
            let sd = (a.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / a.len() as f64).sqrt();
            for (j, (call_id, ..)) in calls.iter().enumerate() {
                let z = if sd < 1e-12 { 0.0 } else { (a[j] - mu) / sd };
                rows.push((ind.name.clone(), call_id.clone(), r.researcher_id.clone(), a[j], z, n, k, rule));
            }
        }
    }
    rows.sort_by(|x, y| {
        (x.0.as_str(), x.1.as_str())
            .cmp(&(y.0.as_str(), y.1.as_str()))
            .then(y.4.partial_cmp(&x.4).unwrap())
            .then(x.2.cmp(&y.2))
    });
    let scores: Vec<String> = rows
        .iter()
        .map(|r| {
            json!({"researcher_id": r.2, "indicator": r.0, "call_id": r.1, "a": r.3, "z": r.4,
                   "n_set": r.5, "k_used": r.6, "rule": r.7})
            .to_string()
        })
        .collect();
    std::fs::write(out.join("scores.jsonl"), scores.join("\n") + "\n").unwrap();

    // (indicator, call, researcher, z, percentile, rank)
    let mut assigned: Vec<(String, String, String, f64, f64, usize)> = Vec::new();
    for r in &rows {
        let peers: Vec<f64> = rows.iter().filter(|q| q.0 == r.0 && q.1 == r.1).map(|q| q.4).collect();
        let pct = 100.0 * peers.iter().filter(|&&z| z <= r.4).count() as f64 / peers.len() as f64;
        let rank = 1 + peers.iter().filter(|&&z| z > r.4).count();
        if pct >= config.percentile_cutoff {
            assigned.push((r.0.clone(), r.1.clone(), r.2.clone(), r.4, pct, rank));
        }
    }
    assigned.sort_by(|x, y| (x.0.as_str(), x.1.as_str(), x.5, x.2.as_str()).cmp(&(y.0.as_str(), y.1.as_str(), y.5, y.2.as_str())));
    let mut csv = String::from("indicator,call_id,researcher_id,z,percentile,rank\n");
    for a in &assigned {
        csv += &format!("{},{},{},{},{:.2},{}\n", a.0, a.1, a.2, a.3, a.4, a.5);
    }
    std::fs::write(out.join("assignments.csv"), csv).unwrap();

    let names: Vec<&str> = config.indicators.iter().map(|i| i.name.as_str()).collect();
    let pairs = |ind: &str| -> BTreeMap<(String, String), f64> {
        assigned
            .iter()
            .filter(|a| a.0 == ind)
            .map(|a| ((a.2.clone(), a.1.clone()), a.4))
            .collect()
    };
    let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    let mut summary = Vec::new();
    for ind in &names {
        let p = pairs(ind);
        let rs: BTreeSet<&String> = p.keys().map(|k| &k.0).collect();
        let cs: BTreeSet<&String> = p.keys().map(|k| &k.1).collect();
        let unique = rs
            .iter()
            .filter(|r| !assigned.iter().any(|a| a.0 != **ind && &&a.2 == *r))
            .count();
        summary.push(json!({"indicator_name": ind, "researchers_assigned": rs.len(), "unique_researchers": unique,
            "avg_calls_per_researcher": ratio(p.len(), rs.len()), "avg_researchers_per_call": ratio(p.len(), cs.len())}));
    }
    let all: BTreeSet<(String, String)> = assigned.iter().map(|a| (a.2.clone(), a.1.clone())).collect();
    let rs: BTreeSet<&String> = all.iter().map(|k| &k.0).collect();
    let cs: BTreeSet<&String> = all.iter().map(|k| &k.1).collect();
    summary.push(json!({"indicator_name": "Combined", "researchers_assigned": rs.len(), "unique_researchers": rs.len(),
        "avg_calls_per_researcher": ratio(all.len(), rs.len()), "avg_researchers_per_call": ratio(all.len(), cs.len())}));

    let mut overlap = Vec::new();
    for row in &names {
        for col in &names {
            if row == col {
                continue;
            }
            let (a, b) = (pairs(row), pairs(col));
            let shared: Vec<(f64, f64)> = a.iter().filter_map(|(k, x)| b.get(k).map(|y| (*x, *y))).collect();
            let pct = if a.is_empty() { None } else { Some(100.0 * shared.len() as f64 / a.len() as f64) };
            let (x, y): (Vec<f64>, Vec<f64>) = shared.into_iter().unzip();
            overlap.push(json!({"row_indicator": row, "col_indicator": col, "overlap_pct": pct, "spearman_rho": spearman(&x, &y)}));
        }
    }

    let mut distributions = Vec::new();
    for ind in &names {
        let mut per: BTreeMap<String, usize> = BTreeMap::new();
        for k in pairs(ind).keys() {
            *per.entry(k.0.clone()).or_default() += 1;
        }
        let mut counts: Vec<f64> = per.values().map(|&c| c as f64).collect();
        counts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut hist: BTreeMap<usize, usize> = BTreeMap::new();
        for c in per.values() {
            *hist.entry(*c).or_default() += 1;
        }
        let q = |p: f64| (!counts.is_empty()).then(|| quantile(&counts, p));
        distributions.push(json!({"indicator_name": ind, "median": q(0.5), "q1": q(0.25), "q3": q(0.75),
            "histogram": hist.into_iter().collect::<Vec<_>>()}));
    }
    let analytics = json!({"summary": summary, "overlap": overlap, "distributions": distributions});
    std::fs::write(out.join("analytics.json"), serde_json::to_string_pretty(&analytics).unwrap() + "\n").unwrap();
}
