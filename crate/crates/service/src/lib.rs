//! HTTP read API over the current run snapshot, and serialized recomputation with new
//! profiling, scoring or ranking parameters.
//!
//! Every request clones the `Arc` of the snapshot that is current when it starts and answers
//! from that value only, so a response never mixes two runs. A recompute builds the next
//! snapshot off the async runtime and publishes it with a single pointer swap.

use std::net::SocketAddr;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{HeaderName, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use fundmatch_core::{ConfigOverrides, Corpus, Error, PipelineConfig, RunSnapshot};
use parking_lot::RwLock;
use serde::{Deserialize, Serialize};
use serde_json::json;

pub const SNAPSHOT_HEADER: &str = "x-snapshot-id";

pub struct AppState {
    corpus: Arc<Corpus>,
    corpus_digest: String,
    current: RwLock<Arc<RunSnapshot>>,
    recompute: Arc<tokio::sync::Mutex<()>>,
    sequence: AtomicU64,
}

impl AppState {
    /// Computes the initial snapshot from `config`.
    pub fn new(corpus: Corpus, config: PipelineConfig) -> fundmatch_core::Result<AppState> {
        let corpus_digest = corpus.digest();
        let snapshot = RunSnapshot::compute(1, &corpus, &corpus_digest, config)?;
        Ok(AppState {
            corpus: Arc::new(corpus),
            corpus_digest,
            current: RwLock::new(Arc::new(snapshot)),
            recompute: Arc::new(tokio::sync::Mutex::new(())),
            sequence: AtomicU64::new(1),
        })
    }

    pub fn snapshot(&self) -> Arc<RunSnapshot> {
        self.current.read().clone()
    }

    /// Applies `overrides` to the current config, computes and publishes. Callers hold the
    /// recompute lock.
    fn compute_next(&self, overrides: &ConfigOverrides) -> fundmatch_core::Result<Arc<RunSnapshot>> {
        let config = overrides.apply(&self.snapshot().config)?;
        let seq = self.sequence.fetch_add(1, Ordering::SeqCst) + 1;
        let next = Arc::new(RunSnapshot::compute(seq, &self.corpus, &self.corpus_digest, config)?);
        *self.current.write() = next.clone();
        Ok(next)
    }
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        ApiError {
            status,
            message: message.into(),
        }
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::UnknownResearcher(_) | Error::UnknownCall(_) | Error::UnknownIndicator(_) => StatusCode::NOT_FOUND,
            Error::InvalidConfig(_) => StatusCode::BAD_REQUEST,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        ApiError::new(status, e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(json!({ "error": self.message }))).into_response()
    }
}

type ApiResult = Result<Response, ApiError>;

/// JSON body tagged with the snapshot it was read from.
fn reply<T: Serialize>(snapshot: &RunSnapshot, body: &T) -> ApiResult {
    let mut resp = Json(body).into_response();
    if let Ok(v) = HeaderValue::from_str(&snapshot.info.snapshot_id) {
        resp.headers_mut().insert(HeaderName::from_static(SNAPSHOT_HEADER), v);
    }
    Ok(resp)
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/snapshot", get(snapshot))
        .route("/indicators", get(indicators))
        .route("/calls", get(calls))
        .route("/calls/:id/candidates", get(candidates))
        .route("/researchers/:id/recommendations", get(recommendations))
        .route("/analytics/summary", get(analytics_summary))
        .route("/analytics/overlap", get(analytics_overlap))
        .route("/analytics/distribution", get(analytics_distribution))
        .route("/recompute", post(recompute))
        .with_state(state)
}

/// Binds `addr` and serves until the process ends.
pub async fn serve(state: Arc<AppState>, addr: SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(state)).await
}

async fn health(State(state): State<Arc<AppState>>) -> ApiResult {
    let s = state.snapshot();
    reply(&s, &json!({ "status": "ok", "snapshot_id": s.info.snapshot_id }))
}

async fn snapshot(State(state): State<Arc<AppState>>) -> ApiResult {
    let s = state.snapshot();
    reply(
        &s,
        &json!({
            "snapshot_id": s.info.snapshot_id,
            "config_digest": s.info.config_digest,
            "corpus_digest": s.info.corpus_digest,
            "created_at": s.info.created_at,
            "config": s.config,
            "population": s.output.population.len(),
            "assignments": s.output.ranking.assignments().len(),
        }),
    )
}

async fn indicators(State(state): State<Arc<AppState>>) -> ApiResult {
    let s = state.snapshot();
    reply(&s, &s.config.indicators)
}

#[derive(Serialize)]
struct CallEntry<'a> {
    call_id: &'a str,
    title: &'a str,
    /// Assignment count per indicator.
    assignments: std::collections::BTreeMap<&'a str, usize>,
}

async fn calls(State(state): State<Arc<AppState>>) -> ApiResult {
    let s = state.snapshot();
    let ranking = &s.output.ranking;
    let entries: Vec<CallEntry<'_>> = state
        .corpus
        .calls
        .iter()
        .map(|c| {
            let mut assignments: std::collections::BTreeMap<&str, usize> =
                ranking.indicators().iter().map(|i| (i.as_str(), 0)).collect();
            for a in ranking.assignments().iter().filter(|a| a.call_id == c.call_id) {
                *assignments.entry(a.indicator_name.as_str()).or_default() += 1;
            }
            CallEntry {
                call_id: &c.call_id,
                title: &c.title,
                assignments,
            }
        })
        .collect();
    reply(&s, &entries)
}

#[derive(Deserialize)]
struct CandidateQuery {
    indicator: Option<String>,
    min_percentile: Option<f64>,
}

async fn candidates(
    State(state): State<Arc<AppState>>,
    Path(call_id): Path<String>,
    Query(q): Query<CandidateQuery>,
) -> ApiResult {
    let s = state.snapshot();
    let indicator = q
        .indicator
        .ok_or_else(|| ApiError::new(StatusCode::BAD_REQUEST, "query parameter `indicator` is required"))?;
    let min = q.min_percentile.unwrap_or(s.config.percentile_cutoff);
    if !(0.0..=100.0).contains(&min) {
        return Err(ApiError::new(StatusCode::BAD_REQUEST, "min_percentile must lie in [0, 100]"));
    }
    let list = s.output.ranking.candidates_for_call(&call_id, &indicator, min)?;
    reply(
        &s,
        &json!({
            "call_id": call_id,
            "indicator": indicator,
            "min_percentile": min,
            "population": s.output.ranking.population(&indicator, &call_id),
            "candidates": list,
        }),
    )
}

async fn recommendations(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult {
    let s = state.snapshot();
    let recs = s.output.ranking.recommend_for_researcher(&id)?;
    reply(&s, &json!({ "researcher_id": id, "recommendations": recs }))
}

async fn analytics_summary(State(state): State<Arc<AppState>>) -> ApiResult {
    let s = state.snapshot();
    reply(&s, &s.output.analytics.summary)
}

async fn analytics_overlap(State(state): State<Arc<AppState>>) -> ApiResult {
    let s = state.snapshot();
    reply(&s, &s.output.analytics.overlap)
}

#[derive(Deserialize)]
struct DistributionQuery {
    indicator: Option<String>,
}

async fn analytics_distribution(State(state): State<Arc<AppState>>, Query(q): Query<DistributionQuery>) -> ApiResult {
    let s = state.snapshot();
    let all = &s.output.analytics.distributions;
    match q.indicator {
        None => reply(&s, all),
        Some(name) => {
            let d = all
                .iter()
                .find(|d| d.indicator_name == name)
                .ok_or(Error::UnknownIndicator(name))?;
            reply(&s, d)
        }
    }
}

async fn recompute(State(state): State<Arc<AppState>>, body: Bytes) -> ApiResult {
    let overrides: ConfigOverrides = if body.iter().all(u8::is_ascii_whitespace) {
        ConfigOverrides::default()
    } else {
        serde_json::from_slice(&body).map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, format!("invalid overrides: {e}")))?
    };
    // The guard moves into the worker so that a dropped request cannot release the lock while
    // its computation is still running.
    let guard = state
        .recompute
        .clone()
        .try_lock_owned()
        .map_err(|_| ApiError::new(StatusCode::CONFLICT, "a recompute is already in flight"))?;
    // Reject bad parameters before spending a worker thread on them.
    overrides.apply(&state.snapshot().config)?;
    let worker = state.clone();
    let next = tokio::task::spawn_blocking(move || {
        let _guard = guard;
        worker.compute_next(&overrides)
    })
    .await
    .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))??;
    reply(
        &next,
        &json!({
            "snapshot_id": next.info.snapshot_id,
            "config_digest": next.info.config_digest,
            "corpus_digest": next.info.corpus_digest,
            "assignments": next.output.ranking.assignments().len(),
        }),
    )
}
