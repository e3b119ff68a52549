//! HTTP API over the time-series library.
//!
//! | method | path | |
//! |---|---|---|
//! | POST | `/series` | multipart upload, or `staging_id` plus metadata to promote |
//! | GET | `/series` | list, `?category=&tag=&limit=&offset=` |
//! | GET | `/series/{id}` | record with values and features |
//! | GET | `/series/{id}/neighbors` | graph, `?k=&tau=&cats=a,b` |
//! | GET | `/series/{id}/features` | features with percentile flags |
//! | GET | `/series/{id}/export.json`, `export.zip` | target plus neighbors, `?k=` |
//! | POST, GET | `/series/{id}/watch` | register or list watches |
//! | POST | `/series/bulk` | zip bundle |
//! | GET | `/categories` | category tree |
//! | POST | `/projection` | start a projection job (409 while one runs) |
//! | GET | `/projection/{job}` | job status, `?format=csv` for points |
//! | GET | `/health` | liveness |
//!
//! With a webhook URL configured, pending alerts are delivered by a background
//! task rather than through any endpoint.

mod error;

use std::collections::HashMap;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use axum::body::Bytes;
use axum::extract::{DefaultBodyLimit, FromRequest, Multipart, Path, Query, Request, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use tse_core::similarity::{GraphEdge, GraphNode, DEFAULT_NEIGHBORS};
use tse_library::alerts::{AlertSink, WatchMode, WatchRegistration, WebhookSink};
use tse_library::{
    downsample, GraphQuery, IngestOutcome, Library, LibraryError, ListFilter, Metadata, MetadataDraft, Projection,
    ProjectionParams, SeriesId, SeriesRecord, StagingId,
};

pub use error::ApiError;

/// Uploads above this size are refused with 413.
pub const DEFAULT_BODY_LIMIT: usize = 50 * 1024 * 1024;
/// Length of the down-sampled traces in graph documents.
pub const PREVIEW_SAMPLES: usize = 200;

#[derive(Debug, Clone)]
pub struct ServerConfig {
    pub listen: SocketAddr,
    pub data_dir: PathBuf,
    pub body_limit: usize,
    pub webhook_url: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "lowercase")]
pub enum JobStatus {
    Running,
    Done { projection: Projection },
    Failed { error: ApiError },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct JobDocument {
    pub job_id: String,
    #[serde(flatten)]
    pub status: JobStatus,
}

pub struct AppState {
    pub library: Arc<Library>,
    pub body_limit: usize,
    jobs: Mutex<HashMap<String, JobStatus>>,
    job_running: AtomicBool,
    next_job: AtomicU64,
}

impl AppState {
    pub fn new(library: Arc<Library>) -> Self {
        AppState {
            library,
            body_limit: DEFAULT_BODY_LIMIT,
            jobs: Mutex::new(HashMap::new()),
            job_running: AtomicBool::new(false),
            next_job: AtomicU64::new(1),
        }
    }
}

type Shared = Arc<AppState>;
type ApiResult<T> = Result<T, ApiError>;

/// Run library work off the async executor.
async fn blocking<T, F>(state: &Shared, f: F) -> ApiResult<T>
where
    F: FnOnce(&Library) -> Result<T, LibraryError> + Send + 'static,
    T: Send + 'static,
{
    let lib = Arc::clone(&state.library);
    tokio::task::spawn_blocking(move || f(&lib))
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal_error", e.to_string()))?
        .map_err(ApiError::from)
}

fn parse_id(s: &str) -> ApiResult<SeriesId> {
    s.parse().map_err(|_| ApiError::not_found())
}

pub fn router(state: AppState) -> Router {
    let limit = state.body_limit;
    Router::new()
        .route("/health", get(health))
        .route("/series", post(upload).get(list))
        .route("/series/bulk", post(bulk))
        .route("/series/{id}", get(get_series))
        .route("/series/{id}/neighbors", get(neighbors))
        .route("/series/{id}/features", get(features))
        .route("/series/{id}/watch", post(register_watch).get(list_watches))
        .route("/series/{id}/{file}", get(export))
        .route("/categories", get(categories))
        .route("/projection", post(start_projection))
        .route("/projection/{job}", get(get_projection))
        // one byte of slack so that a body of exactly `limit` bytes is accepted
        .layer(DefaultBodyLimit::max(limit + 1))
        .with_state(Arc::new(state))
}

pub async fn serve(config: ServerConfig) -> std::io::Result<()> {
    let library = Arc::new(Library::open(&config.data_dir).map_err(std::io::Error::other)?);
    if let Some(url) = &config.webhook_url {
        spawn_delivery(Arc::clone(&library), Arc::new(WebhookSink::new(url.clone())), DELIVERY_PERIOD);
    }
    let state = AppState { body_limit: config.body_limit, ..AppState::new(library) };
    let listener = tokio::net::TcpListener::bind(config.listen).await?;
    axum::serve(listener, router(state)).await
}

/// How often the background task retries the alert outbox.
pub const DELIVERY_PERIOD: Duration = Duration::from_secs(5);
const DELIVERY_BATCH: usize = 100;

/// Drain the outbox into `sink` every `period`. A failing sink leaves the
/// remaining alerts queued for the next round.
pub fn spawn_delivery(
    library: Arc<Library>,
    sink: Arc<dyn AlertSink>,
    period: Duration,
) -> tokio::task::JoinHandle<()> {
    tokio::spawn(async move {
        let mut ticker = tokio::time::interval(period);
        loop {
            ticker.tick().await;
            let (lib, sink) = (Arc::clone(&library), Arc::clone(&sink));
            let _ = tokio::task::spawn_blocking(move || lib.drain_outbox(sink.as_ref(), DELIVERY_BATCH)).await;
        }
    })
}

async fn health() -> Json<serde_json::Value> {
    Json(serde_json::json!({ "status": "ok" }))
}

fn check_length(headers: &HeaderMap, limit: usize) -> ApiResult<()> {
    let declared =
        headers.get(header::CONTENT_LENGTH).and_then(|v| v.to_str().ok()).and_then(|v| v.parse::<usize>().ok());
    match declared {
        Some(n) if n > limit => Err(ApiError::too_large(limit)),
        _ => Ok(()),
    }
}

fn multipart_error(e: axum::extract::multipart::MultipartError, limit: usize) -> ApiError {
    if e.status() == StatusCode::PAYLOAD_TOO_LARGE {
        ApiError::too_large(limit)
    } else {
        ApiError::bad_request("malformed_request", e.body_text())
    }
}

struct UploadForm {
    file: Option<(String, Bytes)>,
    staging_id: Option<String>,
    draft: MetadataDraft,
}

async fn read_form(state: &Shared, headers: &HeaderMap, request: Request) -> ApiResult<UploadForm> {
    let limit = state.body_limit;
    check_length(headers, limit)?;
    let mut multipart = Multipart::from_request(request, &())
        .await
        .map_err(|e| ApiError::bad_request("malformed_request", e.body_text()))?;
    let mut form = UploadForm { file: None, staging_id: None, draft: MetadataDraft::default() };
    while let Some(field) = multipart.next_field().await.map_err(|e| multipart_error(e, limit))? {
        let name = field.name().unwrap_or_default().to_string();
        if name == "file" {
            let filename = field.file_name().unwrap_or("upload").to_string();
            let bytes = field.bytes().await.map_err(|e| multipart_error(e, limit))?;
            form.file = Some((filename, bytes));
        } else {
            let text = field.text().await.map_err(|e| multipart_error(e, limit))?;
            if name == "staging_id" {
                form.staging_id = Some(text);
            } else {
                form.draft.set(&name, text);
            }
        }
    }
    Ok(form)
}

async fn upload(State(state): State<Shared>, headers: HeaderMap, request: Request) -> ApiResult<Response> {
    let form = read_form(&state, &headers, request).await?;
    let report = match (form.file, form.staging_id) {
        (Some((filename, bytes)), None) => {
            blocking(&state, move |lib| lib.ingest_one(&bytes, &filename, &form.draft)).await?
        }
        (None, Some(sid)) => {
            let sid: StagingId = sid.parse().map_err(|_| ApiError::not_found())?;
            blocking(&state, move |lib| lib.promote(&sid, &form.draft)).await?
        }
        (Some(_), Some(_)) => {
            return Err(ApiError::bad_request("malformed_request", "send either a file or a staging_id"))
        }
        (None, None) => return Err(ApiError::bad_request("malformed_request", "missing `file` field")),
    };
    let status = match report.outcome {
        IngestOutcome::Added { .. } => StatusCode::CREATED,
        IngestOutcome::Staged { .. } => StatusCode::OK,
    };
    Ok((status, Json(report)).into_response())
}

async fn bulk(State(state): State<Shared>, headers: HeaderMap, request: Request) -> ApiResult<Response> {
    let is_multipart =
        headers.get(header::CONTENT_TYPE).and_then(|v| v.to_str().ok()).is_some_and(|v| v.starts_with("multipart/"));
    let archive = if is_multipart {
        read_form(&state, &headers, request)
            .await?
            .file
            .map(|(_, b)| b)
            .ok_or_else(|| ApiError::bad_request("malformed_request", "missing `file` field"))?
    } else {
        check_length(&headers, state.body_limit)?;
        Bytes::from_request(request, &()).await.map_err(|_| ApiError::too_large(state.body_limit))?
    };
    let report = blocking(&state, move |lib| lib.ingest_bulk(&archive)).await?;
    Ok(Json(report).into_response())
}

#[derive(Debug, Deserialize)]
struct ListParams {
    category: Option<String>,
    tag: Option<String>,
    limit: Option<usize>,
    #[serde(default)]
    offset: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesSummary {
    pub id: SeriesId,
    pub created_at: i64,
    pub length: usize,
    pub metadata: Metadata,
}

/// Listing as served by `GET /series`.
pub fn series_summaries(lib: &Library, filter: &ListFilter, offset: usize, limit: Option<usize>) -> Vec<SeriesSummary> {
    lib.list(filter)
        .into_iter()
        .skip(offset)
        .take(limit.unwrap_or(usize::MAX))
        .map(|r| SeriesSummary {
            id: r.id,
            created_at: r.created_at,
            length: r.values.len(),
            metadata: r.metadata.clone(),
        })
        .collect()
}

async fn list(State(state): State<Shared>, Query(p): Query<ListParams>) -> ApiResult<Json<Vec<SeriesSummary>>> {
    let filter = ListFilter { category_prefix: p.category, tag: p.tag };
    let out = blocking(&state, move |lib| Ok(series_summaries(lib, &filter, p.offset, p.limit))).await?;
    Ok(Json(out))
}

async fn get_series(State(state): State<Shared>, Path(id): Path<String>) -> ApiResult<Json<SeriesRecordDoc>> {
    let id = parse_id(&id)?;
    let record = blocking(&state, move |lib| lib.get(&id)).await?;
    Ok(Json(SeriesRecordDoc::from(&*record)))
}

/// A stored series as served over HTTP.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesRecordDoc {
    pub id: SeriesId,
    pub created_at: i64,
    pub license: String,
    pub truncated: bool,
    pub metadata: Metadata,
    pub features: tse_core::FeatureVector,
    pub values: Vec<f64>,
}

impl From<&SeriesRecord> for SeriesRecordDoc {
    fn from(r: &SeriesRecord) -> Self {
        SeriesRecordDoc {
            id: r.id,
            created_at: r.created_at,
            license: r.license.clone(),
            truncated: r.truncated,
            metadata: r.metadata.clone(),
            features: r.features.clone(),
            values: r.values.clone(),
        }
    }
}

#[derive(Debug, Deserialize)]
struct NeighborParams {
    k: Option<usize>,
    tau: Option<f64>,
    cats: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphNodeDoc {
    #[serde(flatten)]
    pub node: GraphNode<SeriesId, f64>,
    pub name: String,
    pub preview: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphDocument {
    pub target: SeriesId,
    pub k: usize,
    pub tau: f64,
    pub epoch: u64,
    pub filtered_count: usize,
    pub nodes: Vec<GraphNodeDoc>,
    pub edges: Vec<GraphEdge<SeriesId, f64>>,
}

/// Neighbor graph of `id` with names and trace previews, as served by
/// `GET /series/{id}/neighbors`.
pub fn graph_document(lib: &Library, id: &SeriesId, query: &GraphQuery) -> Result<GraphDocument, LibraryError> {
    let g = lib.graph(id, query)?;
    let nodes = g
        .graph
        .nodes
        .into_iter()
        .map(|node| {
            let rec = lib.get(&node.id)?;
            Ok(GraphNodeDoc {
                name: rec.metadata.name.clone(),
                preview: downsample(&rec.values, PREVIEW_SAMPLES),
                node,
            })
        })
        .collect::<Result<Vec<_>, LibraryError>>()?;
    Ok(GraphDocument {
        target: g.graph.target,
        k: g.graph.k,
        tau: g.graph.tau,
        epoch: g.graph.epoch,
        filtered_count: g.filtered_count,
        nodes,
        edges: g.graph.edges,
    })
}

async fn neighbors(
    State(state): State<Shared>,
    Path(id): Path<String>,
    Query(p): Query<NeighborParams>,
) -> ApiResult<Json<GraphDocument>> {
    let id = parse_id(&id)?;
    let query = GraphQuery {
        k: p.k.unwrap_or(DEFAULT_NEIGHBORS),
        tau: p.tau,
        categories: p
            .cats
            .map(|c| c.split(',').map(str::trim).filter(|s| !s.is_empty()).map(String::from).collect())
            .unwrap_or_default(),
    };
    let doc = blocking(&state, move |lib| graph_document(lib, &id, &query)).await?;
    Ok(Json(doc))
}

async fn features(State(state): State<Shared>, Path(id): Path<String>) -> ApiResult<Response> {
    let id = parse_id(&id)?;
    let report = blocking(&state, move |lib| lib.features(&id)).await?;
    Ok(Json(report).into_response())
}

#[derive(Debug, Deserialize)]
struct ExportParams {
    k: Option<usize>,
}

async fn export(
    State(state): State<Shared>,
    Path((id, file)): Path<(String, String)>,
    Query(p): Query<ExportParams>,
) -> ApiResult<Response> {
    let Some(format) = file.strip_prefix("export.") else {
        return Err(ApiError::not_found());
    };
    let id = parse_id(&id)?;
    let k = p.k.unwrap_or(DEFAULT_NEIGHBORS);
    match format {
        "json" => {
            let doc = blocking(&state, move |lib| lib.export_json(&id, k)).await?;
            let disposition = format!("attachment; filename=\"{id}.json\"");
            Ok(([(header::CONTENT_DISPOSITION, disposition)], Json(doc)).into_response())
        }
        "zip" => {
            let bytes = blocking(&state, move |lib| lib.export_zip(&id, k)).await?;
            let disposition = format!("attachment; filename=\"{id}.zip\"");
            Ok((
                [(header::CONTENT_TYPE, "application/zip".to_string()), (header::CONTENT_DISPOSITION, disposition)],
                bytes,
            )
                .into_response())
        }
        other => Err(ApiError::bad_request("unknown_format", format!("unknown export format `{other}`"))),
    }
}

async fn register_watch(
    State(state): State<Shared>,
    Path(id): Path<String>,
    body: Option<Json<WatchMode>>,
) -> ApiResult<Response> {
    let id = parse_id(&id)?;
    let mode = body.map(|Json(m)| m).unwrap_or_default();
    let w = blocking(&state, move |lib| lib.register_watch(&id, mode)).await?;
    Ok((StatusCode::CREATED, Json(w)).into_response())
}

async fn list_watches(State(state): State<Shared>, Path(id): Path<String>) -> ApiResult<Json<Vec<WatchRegistration>>> {
    let id = parse_id(&id)?;
    let watches = blocking(&state, move |lib| {
        lib.get(&id)?;
        Ok(lib.watches().into_iter().filter(|w| w.series_id == id).collect())
    })
    .await?;
    Ok(Json(watches))
}

async fn categories(State(state): State<Shared>) -> ApiResult<Response> {
    let tree = blocking(&state, |lib| Ok(lib.categories())).await?;
    Ok(Json(tree).into_response())
}

async fn start_projection(State(state): State<Shared>, body: Option<Json<ProjectionParams>>) -> ApiResult<Response> {
    let params = body.map(|Json(p)| p).unwrap_or_default();
    if state.job_running.swap(true, Ordering::SeqCst) {
        return Err(ApiError::new(StatusCode::CONFLICT, "projection_running", "a projection job is already running"));
    }
    let job_id = state.next_job.fetch_add(1, Ordering::SeqCst).to_string();
    state.jobs.lock().expect("jobs lock").insert(job_id.clone(), JobStatus::Running);
    let worker = Arc::clone(&state);
    let id = job_id.clone();
    tokio::task::spawn_blocking(move || {
        let status = match worker.library.project(&params) {
            Ok(projection) => JobStatus::Done { projection },
            Err(e) => JobStatus::Failed { error: e.into() },
        };
        worker.jobs.lock().expect("jobs lock").insert(id, status);
        worker.job_running.store(false, Ordering::SeqCst);
    });
    Ok((StatusCode::ACCEPTED, Json(JobDocument { job_id, status: JobStatus::Running })).into_response())
}

#[derive(Debug, Deserialize)]
struct JobParams {
    format: Option<String>,
}

async fn get_projection(
    State(state): State<Shared>,
    Path(job): Path<String>,
    Query(p): Query<JobParams>,
) -> ApiResult<Response> {
    let status = state.jobs.lock().expect("jobs lock").get(&job).cloned().ok_or_else(ApiError::not_found)?;
    match (p.format.as_deref(), status) {
        (None | Some("json"), status) => Ok(Json(JobDocument { job_id: job, status }).into_response()),
        (Some("csv"), JobStatus::Done { projection }) => {
            Ok(([(header::CONTENT_TYPE, "text/csv")], projection.to_csv()).into_response())
        }
        (Some("csv"), JobStatus::Running) => {
            Err(ApiError::new(StatusCode::CONFLICT, "projection_running", "the job has not finished"))
        }
        (Some("csv"), JobStatus::Failed { error }) => Err(error),
        (Some(other), _) => Err(ApiError::bad_request("unknown_format", format!("unknown format `{other}`"))),
    }
}
