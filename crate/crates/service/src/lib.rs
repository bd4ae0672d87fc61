//! HTTP facade over the extraction pipeline.
//!
//! Endpoints:
//!
//! | method | path              | body / query                                   |
//! |--------|-------------------|------------------------------------------------|
//! | GET    | `/schema`         |                                                |
//! | PUT    | `/schema`         | schema file                                    |
//! | GET    | `/config`         |                                                |
//! | PUT    | `/config`         | run config file                                |
//! | POST   | `/analyze`        | `{"text", "mode", "task", "gold"}`, `?full=1`  |
//! | POST   | `/label`          | `{"extraction_id", "verdict"}`                 |
//! | GET    | `/metrics`        | `?scope=&task=&sort=&order=`                   |
//! | GET    | `/devset/export`  |                                                |
//! | POST   | `/devset/import`  | JSON lines                                     |
//!
//! Sessions are selected by the [`SESSION_HEADER`] header. Each session has
//! its own run config and label store; the schema is shared.

use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::{Arc, Mutex, RwLock};

use axum::body::Bytes;
use axum::extract::{Query, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Deserialize;
use serde_json::{json, Value};
use tower_http::services::ServeDir;

use zsie_core::config::load_config;
use zsie_core::devset::{DevsetError, Scope, SortKey, SortOrder};
use zsie_core::schema::{load_schema, save_schema, SchemaError};
use zsie_core::{
    run_e2e, run_task, Backends, DocumentAnnotations, GoldSpans, LabelStore, MetricsQuery, PipelineError, RunConfig,
    Schema, Task, Verdict,
};

pub const SESSION_HEADER: &str = "x-session-id";
pub const DEFAULT_SESSION: &str = "default";
/// Ranked scores kept per extraction unless `?full=1`.
pub const RANKED_SCORES_SHOWN: usize = 5;

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    code: &'static str,
    detail: Value,
}

impl ApiError {
    fn new(status: StatusCode, code: &'static str, detail: impl Into<Value>) -> Self {
        ApiError {
            status,
            code,
            detail: detail.into(),
        }
    }

    fn bad_request(detail: impl Into<Value>) -> Self {
        ApiError::new(StatusCode::BAD_REQUEST, "bad_request", detail)
    }

    fn internal(detail: impl ToString) -> Self {
        ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", detail.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(json!({"error": self.code, "detail": self.detail}))).into_response()
    }
}

impl From<DevsetError> for ApiError {
    fn from(e: DevsetError) -> Self {
        match e {
            DevsetError::UnknownExtraction(id) => {
                ApiError::new(StatusCode::NOT_FOUND, "unknown_extraction", format!("no extraction {id} in this session"))
            }
            DevsetError::Parse { .. } => ApiError::new(StatusCode::BAD_REQUEST, "parse_error", e.to_string()),
            other => ApiError::internal(other),
        }
    }
}

fn pipeline_error(e: PipelineError) -> ApiError {
    match e {
        PipelineError::InvalidSchema(report) => ApiError::new(
            StatusCode::UNPROCESSABLE_ENTITY,
            "invalid_schema",
            serde_json::to_value(report).expect("report serializes"),
        ),
        PipelineError::Config(msg) => ApiError::new(StatusCode::CONFLICT, "no_entity_source", msg),
        PipelineError::InvalidGold(msg) => ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "invalid_gold", msg),
        PipelineError::Stage { stage, source, partial } => ApiError::new(
            StatusCode::BAD_GATEWAY,
            "backend_failure",
            json!({
                "stage": stage,
                "message": source.to_string(),
                "partial": serde_json::to_value(*partial).expect("annotations serialize"),
            }),
        ),
    }
}

struct Session {
    config: RwLock<RunConfig>,
    /// Tokio's mutex hands out the lock in FIFO order, which queues analyze
    /// runs per session.
    runs: tokio::sync::Mutex<()>,
    store: Mutex<LabelStore>,
}

pub struct AppState {
    schema: RwLock<Arc<Schema>>,
    /// Serializes schema replacement.
    schema_writer: tokio::sync::Mutex<()>,
    default_config: RunConfig,
    backends: Backends,
    label_dir: Option<PathBuf>,
    sessions: Mutex<HashMap<String, Arc<Session>>>,
}

impl AppState {
    /// `label_dir`, when set, holds one persistent label log per session.
    pub fn new(schema: Schema, config: RunConfig, backends: Backends, label_dir: Option<PathBuf>) -> Self {
        AppState {
            schema: RwLock::new(Arc::new(schema)),
            schema_writer: tokio::sync::Mutex::new(()),
            default_config: config,
            backends,
            label_dir,
            sessions: Mutex::new(HashMap::new()),
        }
    }

    pub fn schema(&self) -> Arc<Schema> {
        self.schema.read().expect("schema lock").clone()
    }

    fn session(&self, headers: &HeaderMap) -> Result<Arc<Session>, ApiError> {
        let id = match headers.get(SESSION_HEADER) {
            None => DEFAULT_SESSION,
            Some(v) => v
                .to_str()
                .ok()
                .filter(|s| !s.is_empty() && s.len() <= 64)
                .filter(|s| s.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_'))
                .ok_or_else(|| ApiError::bad_request("session id must be 1-64 characters of [A-Za-z0-9_-]"))?,
        };
        let mut sessions = self.sessions.lock().expect("sessions lock");
        if let Some(s) = sessions.get(id) {
            return Ok(s.clone());
        }
        let store = match &self.label_dir {
            Some(dir) => {
                std::fs::create_dir_all(dir).map_err(ApiError::internal)?;
                LabelStore::open(dir.join(format!("{id}.jsonl")))?
            }
            None => LabelStore::in_memory(),
        };
        let session = Arc::new(Session {
            config: RwLock::new(self.default_config.clone()),
            runs: tokio::sync::Mutex::new(()),
            store: Mutex::new(store),
        });
        sessions.insert(id.to_string(), session.clone());
        Ok(session)
    }
}

/// Builds the router. Static files under `ui_dir` are served for paths that
/// match no endpoint.
pub fn router(state: Arc<AppState>, ui_dir: Option<PathBuf>) -> Router {
    let api = Router::new()
        .route("/schema", get(get_schema).put(put_schema))
        .route("/config", get(get_config).put(put_config))
        .route("/analyze", post(analyze))
        .route("/label", post(label))
        .route("/metrics", get(metrics))
        .route("/devset/export", get(export_devset))
        .route("/devset/import", post(import_devset))
        .with_state(state);
    match ui_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api,
    }
}

/// Serves `router` on `listener` until the process is stopped.
pub async fn serve(listener: tokio::net::TcpListener, router: Router) -> std::io::Result<()> {
    axum::serve(listener, router).await
}

async fn get_schema(State(state): State<Arc<AppState>>) -> Response {
    ([(header::CONTENT_TYPE, "application/json")], save_schema(&state.schema())).into_response()
}

async fn put_schema(State(state): State<Arc<AppState>>, body: Bytes) -> Result<Json<Value>, ApiError> {
    let parsed = load_schema(&body).map_err(|e| match e {
        SchemaError::Invalid(report) => ApiError::new(
            StatusCode::UNPROCESSABLE_ENTITY,
            "invalid_schema",
            serde_json::to_value(report).expect("report serializes"),
        ),
        parse => ApiError::new(StatusCode::BAD_REQUEST, "parse_error", parse.to_string()),
    })?;
    let _writer = state.schema_writer.lock().await;
    let version = state.schema().version + 1;
    let next = Schema { version, ..parsed };
    *state.schema.write().expect("schema lock") = Arc::new(next);
    log::info!("schema replaced, now version {version}");
    Ok(Json(json!({ "version": version })))
}

async fn get_config(State(state): State<Arc<AppState>>, headers: HeaderMap) -> Result<Json<RunConfig>, ApiError> {
    let session = state.session(&headers)?;
    let config = session.config.read().expect("config lock").clone();
    Ok(Json(config))
}

async fn put_config(State(state): State<Arc<AppState>>, headers: HeaderMap, body: Bytes) -> Result<Json<RunConfig>, ApiError> {
    let session = state.session(&headers)?;
    let config = load_config(&body).map_err(|e| match e {
        zsie_core::config::ConfigError::Invalid(msg) => ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "invalid_config", msg),
        parse => ApiError::new(StatusCode::BAD_REQUEST, "parse_error", parse.to_string()),
    })?;
    *session.config.write().expect("config lock") = config.clone();
    Ok(Json(config))
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "lowercase")]
enum AnalyzeMode {
    E2e,
    Task,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct AnalyzeRequest {
    text: String,
    #[serde(default = "default_mode")]
    mode: AnalyzeMode,
    #[serde(default)]
    task: Option<Task>,
    #[serde(default)]
    gold: Option<GoldSpans>,
}

fn default_mode() -> AnalyzeMode {
    AnalyzeMode::E2e
}

#[derive(Debug, Default, Deserialize)]
struct FullFlag {
    #[serde(default)]
    full: Option<String>,
}

impl FullFlag {
    fn on(&self) -> bool {
        matches!(self.full.as_deref(), Some("1" | "true"))
    }
}

fn truncate_rankings(doc: &mut DocumentAnnotations, keep: usize) {
    for list in [&mut doc.entities, &mut doc.relations, &mut doc.events, &mut doc.arguments, &mut doc.rejected] {
        for x in list.iter_mut() {
            x.all_scores.truncate(keep);
        }
    }
}

async fn analyze(
    State(state): State<Arc<AppState>>,
    headers: HeaderMap,
    Query(flag): Query<FullFlag>,
    body: Bytes,
) -> Result<Json<DocumentAnnotations>, ApiError> {
    let request: AnalyzeRequest =
        serde_json::from_slice(&body).map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, "parse_error", e.to_string()))?;
    let task = match (&request.mode, request.task) {
        (AnalyzeMode::Task, None) => return Err(ApiError::bad_request("mode \"task\" requires a task")),
        (AnalyzeMode::E2e, Some(_)) => return Err(ApiError::bad_request("mode \"e2e\" takes no task")),
        (AnalyzeMode::E2e, None) if request.gold.is_some() => {
            return Err(ApiError::bad_request("gold spans are only accepted in task mode"))
        }
        (_, task) => task,
    };
    let session = state.session(&headers)?;
    let _turn = session.runs.lock().await;
    let schema = state.schema();
    let config = session.config.read().expect("config lock").clone();
    let backends = state.backends.clone();
    let result = tokio::task::spawn_blocking(move || match task {
        None => run_e2e(&request.text, &schema, &config, &backends),
        Some(task) => run_task(task, &request.text, request.gold.as_ref(), &schema, &config, &backends),
    })
    .await
    .map_err(ApiError::internal)?;
    let mut doc = result.map_err(pipeline_error)?;
    session.store.lock().expect("store lock").register_document(&doc);
    if !flag.on() {
        truncate_rankings(&mut doc, RANKED_SCORES_SHOWN);
    }
    Ok(Json(doc))
}

#[derive(Debug, Deserialize)]
struct LabelRequest {
    extraction_id: String,
    verdict: String,
}

async fn label(State(state): State<Arc<AppState>>, headers: HeaderMap, body: Bytes) -> Result<Json<Value>, ApiError> {
    let request: LabelRequest =
        serde_json::from_slice(&body).map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, "parse_error", e.to_string()))?;
    let verdict: Verdict = request
        .verdict
        .parse()
        .map_err(|_| ApiError::bad_request(format!("unknown verdict {:?}", request.verdict)))?;
    let session = state.session(&headers)?;
    let mut store = session.store.lock().expect("store lock");
    store.record_label(&request.extraction_id, verdict)?;
    let recorded = store.label(&request.extraction_id).cloned();
    Ok(Json(serde_json::to_value(recorded).expect("label serializes")))
}

fn parse_param<T: std::str::FromStr>(params: &HashMap<String, String>, key: &str) -> Result<Option<T>, ApiError> {
    params
        .get(key)
        .filter(|v| !v.is_empty())
        .map(|v| v.parse().map_err(|_| ApiError::bad_request(format!("invalid {key}: {v:?}"))))
        .transpose()
}

async fn metrics(
    State(state): State<Arc<AppState>>,
    headers: HeaderMap,
    Query(params): Query<HashMap<String, String>>,
) -> Result<Json<Value>, ApiError> {
    let query = MetricsQuery {
        scope: parse_param::<Scope>(&params, "scope")?,
        task: parse_param::<Task>(&params, "task")?,
        sort: parse_param::<SortKey>(&params, "sort")?.unwrap_or_default(),
        order: parse_param::<SortOrder>(&params, "order")?,
    };
    let session = state.session(&headers)?;
    let schema = state.schema();
    let rows = session.store.lock().expect("store lock").metrics(&query, Some(&schema));
    Ok(Json(json!({ "schema_version": schema.version, "rows": rows })))
}

async fn export_devset(State(state): State<Arc<AppState>>, headers: HeaderMap) -> Result<Response, ApiError> {
    let session = state.session(&headers)?;
    let bytes = session.store.lock().expect("store lock").export_devset();
    Ok(([(header::CONTENT_TYPE, "application/x-ndjson")], bytes).into_response())
}

async fn import_devset(State(state): State<Arc<AppState>>, headers: HeaderMap, body: Bytes) -> Result<Json<Value>, ApiError> {
    let session = state.session(&headers)?;
    let schema = state.schema();
    let report = session.store.lock().expect("store lock").import_devset(&body, Some(&schema))?;
    Ok(Json(serde_json::to_value(report).expect("report serializes")))
}
