use std::str::FromStr;
use std::sync::Arc;

use atlas_core::analytics::{
    sankey_diagram, sort_heads, word_histogram, Direction, HeadScore, Metric, SankeyDiagram,
    WordHistogram, DEFAULT_SANKEY_PRUNE,
};
use atlas_core::dump::Violation;
use atlas_core::headlens::{build_head_profile, cluster_pair, ClusterPair, HeadProfile, DEFAULT_K};
use atlas_core::piling::{pile_layer, LayerPiles};
use atlas_core::{
    io, validate_dump, AttentionRecord, AttnType, CorpusStats, CorpusStore, DumpDocument, Error,
    SentenceDetail, SentenceSummary,
};
use axum::body::Bytes;
use axum::extract::rejection::QueryRejection;
use axum::extract::{DefaultBodyLimit, Path, Query, State};
use axum::http::StatusCode;
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use tower_http::cors::CorsLayer;

use crate::{ApiError, AppState, Snapshot};

type ApiResult<T> = Result<Json<T>, ApiError>;

/// Uploaded dumps may be large; this caps a single request body.
const MAX_UPLOAD_BYTES: usize = 512 * 1024 * 1024;

pub fn router(state: AppState) -> Router {
    let api = Router::new()
        .route("/sentences", get(list_sentences))
        .route("/sentences/{id}", get(sentence))
        .route("/sentences/{id}/attention", get(attention))
        .route("/sentences/{id}/sort", get(sort))
        .route("/sentences/{id}/piles", get(piles))
        .route("/sentences/{id}/histogram", get(histogram))
        .route("/sentences/{id}/sankey", get(sankey))
        .route("/headlens", get(headlens))
        .route("/headlens/pair", get(headlens_pair))
        .route("/dumps", post(upload))
        .route("/healthz", get(health));
    Router::new()
        .nest("/api/v1", api)
        .fallback(unknown_route)
        .method_not_allowed_fallback(wrong_method)
        .layer(DefaultBodyLimit::max(MAX_UPLOAD_BYTES))
        .layer(CorsLayer::permissive())
        .with_state(state)
}

async fn unknown_route() -> ApiError {
    ApiError::not_found("no such route")
}

async fn wrong_method() -> ApiError {
    ApiError::new(
        StatusCode::METHOD_NOT_ALLOWED,
        "method_not_allowed",
        "method not allowed on this route",
    )
}

fn query<T>(q: Result<Query<T>, QueryRejection>) -> Result<T, ApiError> {
    q.map(|Query(v)| v)
        .map_err(|e| ApiError::bad_request(e.body_text()))
}

fn parse<T: FromStr<Err = Error>>(
    name: &str,
    value: Option<&str>,
    default: T,
) -> Result<T, ApiError> {
    match value {
        None => Ok(default),
        Some(v) => v
            .parse()
            .map_err(|e: Error| ApiError::bad_request(format!("{name}: {e}"))),
    }
}

fn attn_type(value: Option<&str>) -> Result<AttnType, ApiError> {
    parse("type", value, AttnType::EncoderSelf)
}

fn require<T>(name: &str, value: Option<T>) -> Result<T, ApiError> {
    value.ok_or_else(|| ApiError::bad_request(format!("missing query parameter `{name}`")))
}

fn loaded(snapshot: &Snapshot) -> Result<&CorpusStore, ApiError> {
    snapshot
        .store
        .as_deref()
        .ok_or_else(|| ApiError::not_found("no corpus loaded"))
}

async fn list_sentences(State(state): State<AppState>) -> Json<Vec<SentenceSummary>> {
    let snapshot = state.snapshot();
    let list = snapshot
        .store
        .as_deref()
        .map(|s| s.sentences().iter().map(|e| e.summary()).collect())
        .unwrap_or_default();
    Json(list)
}

async fn sentence(
    State(state): State<AppState>,
    Path(id): Path<String>,
) -> ApiResult<SentenceDetail> {
    let snapshot = state.snapshot();
    Ok(Json(loaded(&snapshot)?.sentence(&id)?.detail()))
}

#[derive(Debug, Deserialize)]
struct LayerQuery {
    #[serde(rename = "type")]
    attn_type: Option<String>,
    layer: Option<usize>,
    head: Option<usize>,
    metric: Option<String>,
    direction: Option<String>,
    threshold: Option<f64>,
}

async fn attention(
    State(state): State<AppState>,
    Path(id): Path<String>,
    q: Result<Query<LayerQuery>, QueryRejection>,
) -> ApiResult<AttentionRecord> {
    let q = query(q)?;
    let t = attn_type(q.attn_type.as_deref())?;
    let (layer, head) = (require("layer", q.layer)?, require("head", q.head)?);
    let snapshot = state.snapshot();
    Ok(Json(
        loaded(&snapshot)?
            .sentence(&id)?
            .record(t, layer, head)?
            .clone(),
    ))
}

async fn sort(
    State(state): State<AppState>,
    Path(id): Path<String>,
    q: Result<Query<LayerQuery>, QueryRejection>,
) -> ApiResult<Vec<HeadScore>> {
    let q = query(q)?;
    let t = attn_type(q.attn_type.as_deref())?;
    let layer = require("layer", q.layer)?;
    let metric = parse("metric", q.metric.as_deref(), Metric::Entropy)?;
    let direction = parse("direction", q.direction.as_deref(), Direction::Ascending)?;
    let snapshot = state.snapshot();
    let heads = loaded(&snapshot)?.sentence(&id)?.layer(t, layer)?;
    Ok(Json(sort_heads(heads, metric, direction)?))
}

async fn piles(
    State(state): State<AppState>,
    Path(id): Path<String>,
    q: Result<Query<LayerQuery>, QueryRejection>,
) -> ApiResult<LayerPiles> {
    let q = query(q)?;
    let t = attn_type(q.attn_type.as_deref())?;
    let layer = require("layer", q.layer)?;
    let threshold = require("threshold", q.threshold)?;
    let snapshot = state.snapshot();
    let heads = loaded(&snapshot)?.sentence(&id)?.layer(t, layer)?;
    Ok(Json(pile_layer(heads, threshold)?))
}

async fn histogram(
    State(state): State<AppState>,
    Path(id): Path<String>,
    q: Result<Query<LayerQuery>, QueryRejection>,
) -> ApiResult<WordHistogram> {
    let q = query(q)?;
    let t = attn_type(q.attn_type.as_deref())?;
    let layer = require("layer", q.layer)?;
    let snapshot = state.snapshot();
    let heads = loaded(&snapshot)?.sentence(&id)?.layer(t, layer)?;
    Ok(Json(word_histogram(heads)?))
}

#[derive(Debug, Deserialize)]
struct SankeyQuery {
    #[serde(rename = "type")]
    attn_type: Option<String>,
    prune: Option<f64>,
}

async fn sankey(
    State(state): State<AppState>,
    Path(id): Path<String>,
    q: Result<Query<SankeyQuery>, QueryRejection>,
) -> ApiResult<SankeyDiagram> {
    let q = query(q)?;
    let t = attn_type(q.attn_type.as_deref())?;
    let snapshot = state.snapshot();
    let s = loaded(&snapshot)?.sentence(&id)?;
    Ok(Json(sankey_diagram(
        s,
        t,
        q.prune.unwrap_or(DEFAULT_SANKEY_PRUNE),
    )?))
}

#[derive(Debug, Deserialize)]
struct HeadLensQuery {
    #[serde(rename = "type")]
    attn_type: Option<String>,
    layer: Option<usize>,
    head: Option<usize>,
    k: Option<usize>,
    seed: Option<u64>,
    query_cluster: Option<usize>,
    key_cluster: Option<usize>,
}

async fn profile(state: &AppState, q: &HeadLensQuery) -> Result<Arc<HeadProfile>, ApiError> {
    let t = attn_type(q.attn_type.as_deref())?;
    let (layer, head) = (require("layer", q.layer)?, require("head", q.head)?);
    let key = (
        t,
        layer,
        head,
        q.k.unwrap_or(DEFAULT_K),
        q.seed.unwrap_or(0),
    );
    let snapshot = state.snapshot();
    loaded(&snapshot)?;
    if let Some(p) = snapshot
        .profiles
        .lock()
        .expect("cache lock poisoned")
        .get(&key)
    {
        return Ok(p.clone());
    }
    let work = snapshot.clone();
    let built = tokio::task::spawn_blocking(move || {
        let store = work.store.as_deref().expect("checked above");
        build_head_profile(store, key.0, key.1, key.2, key.3, key.4)
    })
    .await
    .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()))??;
    let mut cache = snapshot.profiles.lock().expect("cache lock poisoned");
    Ok(cache.entry(key).or_insert_with(|| Arc::new(built)).clone())
}

async fn headlens(
    State(state): State<AppState>,
    q: Result<Query<HeadLensQuery>, QueryRejection>,
) -> ApiResult<HeadProfile> {
    let q = query(q)?;
    Ok(Json(profile(&state, &q).await?.as_ref().clone()))
}

async fn headlens_pair(
    State(state): State<AppState>,
    q: Result<Query<HeadLensQuery>, QueryRejection>,
) -> ApiResult<ClusterPair> {
    let q = query(q)?;
    let (qc, kc) = (
        require("query_cluster", q.query_cluster)?,
        require("key_cluster", q.key_cluster)?,
    );
    let p = profile(&state, &q).await?;
    Ok(Json(cluster_pair(&p, qc, kc)?))
}

/// Response to a successful upload.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IngestSummary {
    pub added: usize,
    pub corpus: CorpusStats,
    pub warnings: Vec<Violation>,
}

async fn upload(
    State(state): State<AppState>,
    body: Bytes,
) -> Result<(StatusCode, Json<IngestSummary>), ApiError> {
    let doc: DumpDocument = io::parse_document(&body)?;
    let report = validate_dump(&doc);
    if !report.is_ok() {
        return Err(Error::Validation(Box::new(report)).into());
    }
    let store = state.ingest(&doc).await?;
    let summary = IngestSummary {
        added: doc.sentences.len(),
        corpus: store.stats(),
        warnings: report.warnings,
    };
    Ok((StatusCode::CREATED, Json(summary)))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Health {
    pub status: String,
    pub corpus: CorpusStats,
}

async fn health(State(state): State<AppState>) -> Json<Health> {
    Json(Health {
        status: "ok".into(),
        corpus: state.store().map(|s| s.stats()).unwrap_or_default(),
    })
}
