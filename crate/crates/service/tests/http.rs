use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use fundmatch_core::corpus::resolve_identities;
use fundmatch_core::embedding::HashProvider;
use fundmatch_core::pipeline::{corpus_documents, embed_documents};
use fundmatch_core::synth::{generate, SynthOptions};
use fundmatch_core::{run, Corpus, PipelineConfig};
use fundmatch_service::{router, AppState, SNAPSHOT_HEADER};
use serde_json::{json, Value};

fn corpus(researchers: usize, calls: usize) -> Corpus {
    let c = generate(&SynthOptions {
        researchers,
        calls,
        seed: 11,
        all_eligible: true,
        ..Default::default()
    })
    .unwrap();
    let res = resolve_identities(&c.masters, &c.profiles, &c.publications).unwrap();
    let store = embed_documents(&HashProvider::new(64), &corpus_documents(&c.publications, &c.calls)).unwrap();
    Corpus::new(c.publications, c.calls, res.researchers, store)
}

struct Server {
    base: String,
    client: reqwest::Client,
    corpus: Corpus,
}

async fn start(researchers: usize, calls: usize) -> Server {
    let corpus = corpus(researchers, calls);
    let state = Arc::new(AppState::new(corpus.clone(), PipelineConfig::default()).unwrap());
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    tokio::spawn(async move { axum::serve(listener, router(state)).await.unwrap() });
    Server {
        base: format!("http://{addr}"),
        client: reqwest::Client::new(),
        corpus,
    }
}

impl Server {
    async fn get(&self, path: &str) -> (u16, Option<String>, Value) {
        let resp = self.client.get(format!("{}{path}", self.base)).send().await.unwrap();
        let status = resp.status().as_u16();
        let id = resp
            .headers()
            .get(SNAPSHOT_HEADER)
            .map(|v| v.to_str().unwrap().to_string());
        (status, id, resp.json().await.unwrap())
    }

    async fn recompute(&self, body: &str) -> (u16, Value) {
        let resp = self
            .client
            .post(format!("{}/recompute", self.base))
            .body(body.to_string())
            .send()
            .await
            .unwrap();
        (resp.status().as_u16(), resp.json().await.unwrap())
    }
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn read_endpoints() {
    let s = start(30, 4).await;
    let (status, id, body) = s.get("/health").await;
    assert_eq!(status, 200);
    assert_eq!(body["status"], "ok");
    assert_eq!(id.unwrap(), body["snapshot_id"].as_str().unwrap());

    let (_, _, snap) = s.get("/snapshot").await;
    assert_eq!(snap["config_digest"].as_str().unwrap().len(), 64);
    assert_eq!(snap["corpus_digest"].as_str().unwrap(), s.corpus.digest());

    let (_, _, inds) = s.get("/indicators").await;
    assert_eq!(inds.as_array().unwrap().len(), 4);
    assert_eq!(inds[0]["name"], "Research background");

    let (_, _, calls) = s.get("/calls").await;
    assert_eq!(calls.as_array().unwrap().len(), 4);
    assert_eq!(calls[0]["call_id"], "CALL-0000");

    let (status, _, recs) = s.get("/researchers/R00000/recommendations").await;
    assert_eq!(status, 200);
    assert_eq!(recs["recommendations"].as_object().unwrap().len(), 4);

    let (_, _, summary) = s.get("/analytics/summary").await;
    assert_eq!(summary.as_array().unwrap().len(), 5);
    let (_, _, overlap) = s.get("/analytics/overlap").await;
    assert_eq!(overlap.as_array().unwrap().len(), 12);
    let (_, _, dist) = s.get("/analytics/distribution?indicator=Current%20focus").await;
    assert_eq!(dist["indicator_name"], "Current focus");
    let (_, _, all) = s.get("/analytics/distribution").await;
    assert_eq!(all.as_array().unwrap().len(), 4);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn error_statuses() {
    let s = start(12, 2).await;
    assert_eq!(s.get("/researchers/NOPE/recommendations").await.0, 404);
    assert_eq!(s.get("/calls/NOPE/candidates?indicator=Current%20focus").await.0, 404);
    assert_eq!(s.get("/calls/CALL-0000/candidates?indicator=Nope").await.0, 404);
    assert_eq!(s.get("/calls/CALL-0000/candidates").await.0, 400);
    assert_eq!(s.get("/analytics/distribution?indicator=Nope").await.0, 404);
    assert_eq!(s.recompute(r#"{"percentile_cutoff": 0}"#).await.0, 400);
    assert_eq!(s.recompute(r#"{"percentile_cutoff": 100.5}"#).await.0, 400);
    assert_eq!(s.recompute(r#"{"top_fraction_denominator": 1}"#).await.0, 400);
    assert_eq!(s.recompute(r#"{"provider": "sidecar"}"#).await.0, 400);
    assert_eq!(s.recompute("{not json").await.0, 400);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn top_percentile_is_the_top_rank() {
    let s = start(40, 3).await;
    for call in ["CALL-0000", "CALL-0001", "CALL-0002"] {
        let (status, _, body) = s
            .get(&format!("/calls/{call}/candidates?indicator=Research%20background&min_percentile=100"))
            .await;
        assert_eq!(status, 200);
        let list = body["candidates"].as_array().unwrap();
        assert!(!list.is_empty());
        assert!(list.iter().all(|c| c["rank"] == 1 && c["percentile"] == 100.0));
    }
}

/// Assignments per (indicator, call) for distinct scores: the k-th best of N has percentile
/// 100 (N - k + 1) / N, so exactly N - ceil(cutoff N / 100) + 1 are at or above the cutoff.
fn expected_count(n: u64, cutoff: u64) -> u64 {
    n + 1 - (cutoff * n).div_ceil(100)
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn lower_cutoff_grows_assignments_by_formula() {
    let s = start(120, 5).await;
    let counts = |calls: &Value| -> BTreeMap<(String, String), u64> {
        let mut out = BTreeMap::new();
        for c in calls.as_array().unwrap() {
            for (ind, n) in c["assignments"].as_object().unwrap() {
                out.insert((c["call_id"].as_str().unwrap().to_string(), ind.clone()), n.as_u64().unwrap());
            }
        }
        out
    };
    let (_, _, before) = s.get("/calls").await;
    let (status, _) = s.recompute(r#"{"percentile_cutoff": 90}"#).await;
    assert_eq!(status, 200);
    let (_, _, after) = s.get("/calls").await;
    let (before, after) = (counts(&before), counts(&after));
    for ((call, ind), &n90) in &after {
        let (_, _, all) = s
            .get(&format!("/calls/{call}/candidates?indicator={}&min_percentile=0", ind.replace(' ', "%20")))
            .await;
        let ranks: BTreeSet<u64> = all["candidates"].as_array().unwrap().iter().map(|c| c["rank"].as_u64().unwrap()).collect();
        let n = all["population"].as_u64().unwrap();
        assert_eq!(ranks.len() as u64, n, "scores are distinct");
        assert_eq!(before[&(call.clone(), ind.clone())], expected_count(n, 95));
        assert_eq!(n90, expected_count(n, 90));
        assert!(n90 >= 2 * before[&(call.clone(), ind.clone())] - 1);
    }
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn empty_override_reproduces_snapshot() {
    let s = start(30, 3).await;
    let (_, _, first) = s.get("/snapshot").await;
    let (_, _, summary) = s.get("/analytics/summary").await;
    let (status, body) = s.recompute("").await;
    assert_eq!(status, 200);
    let (status2, body2) = s.recompute("{}").await;
    assert_eq!(status2, 200);
    let (_, _, second) = s.get("/snapshot").await;
    assert_ne!(body["snapshot_id"], first["snapshot_id"]);
    assert_ne!(body2["snapshot_id"], body["snapshot_id"]);
    assert_eq!(second["config_digest"], first["config_digest"]);
    assert_eq!(second["corpus_digest"], first["corpus_digest"]);
    assert_eq!(s.get("/analytics/summary").await.2, summary);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 8)]
async fn readers_never_see_a_mixed_snapshot() {
    let s = Arc::new(start(80, 6).await);
    let cfg95 = PipelineConfig::default();
    let cfg90 = PipelineConfig {
        percentile_cutoff: 90.0,
        ..Default::default()
    };
    let expected: BTreeMap<String, Value> = [&cfg95, &cfg90]
        .into_iter()
        .map(|c| {
            let out = run(&s.corpus, c).unwrap();
            (c.digest()[..12].to_string(), json!(out.analytics.summary))
        })
        .collect();

    let stop = Arc::new(std::sync::atomic::AtomicBool::new(false));
    let mut readers = Vec::new();
    for _ in 0..6 {
        let (s, stop) = (s.clone(), stop.clone());
        readers.push(tokio::spawn(async move {
            let mut seen = Vec::new();
            while !stop.load(std::sync::atomic::Ordering::Relaxed) {
                let (status, id, body) = s.get("/analytics/summary").await;
                assert_eq!(status, 200);
                seen.push((id.unwrap(), body));
            }
            seen
        }));
    }
    for round in 0..6 {
        let cutoff = if round % 2 == 0 { 90 } else { 95 };
        let (status, _) = s.recompute(&format!(r#"{{"percentile_cutoff": {cutoff}}}"#)).await;
        assert_eq!(status, 200);
    }
    stop.store(true, std::sync::atomic::Ordering::Relaxed);
    let mut ids = BTreeSet::new();
    for r in readers {
        for (id, body) in r.await.unwrap() {
            let digest = id.split_once('-').unwrap().1;
            assert_eq!(&body, &expected[digest], "snapshot {id}");
            ids.insert(id);
        }
    }
    assert!(ids.len() >= 2, "readers observed {ids:?}");
}
