//! HTTP front end for the review store.
//!
//! | method | path                                   | body / query                              |
//! |--------|----------------------------------------|-------------------------------------------|
//! | GET    | `/runs`                                |                                           |
//! | POST   | `/runs`                                | `{run_id, run, dataset?}` or `{run_id, triples, documents?}` |
//! | GET    | `/runs/{id}/items`                     | `?status=&page=&page_size=`               |
//! | POST   | `/runs/{id}/items/{item}/decision`     | `{action, edited_triple?, reviewer}`      |
//! | GET    | `/runs/{id}/stats`                     |                                           |
//! | GET    | `/runs/{id}/export`                    | `?status=accepted`                        |
//!
//! `run` and `dataset` carry the contents of a run file and a dataset file.
//! The UI bundle, when configured, is served at `/`. There is no
//! authentication; bind to a trusted interface.

use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::Arc;

use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{Html, IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Deserialize;
use serde_json::json;
use tower_http::services::ServeDir;

use ontoforge::corpus::read_dataset;
use ontoforge::extract::read_run;
use ontoforge::review::{
    create_review, Decision, ReviewError, ReviewStatus, ReviewStore, DEFAULT_PAGE_SIZE,
};
use ontoforge::Triple;

/// Largest page a client may ask for.
pub const MAX_PAGE_SIZE: usize = 500;

#[derive(Debug, Clone)]
pub struct ServerSettings {
    pub page_size: usize,
    pub ui_dir: Option<PathBuf>,
}

impl Default for ServerSettings {
    fn default() -> Self {
        ServerSettings {
            page_size: DEFAULT_PAGE_SIZE,
            ui_dir: None,
        }
    }
}

#[derive(Clone)]
struct AppState {
    store: Arc<ReviewStore>,
    page_size: usize,
}

pub struct ApiError(StatusCode, String);

impl ApiError {
    fn bad_request(msg: impl Into<String>) -> Self {
        ApiError(StatusCode::BAD_REQUEST, msg.into())
    }
}

impl From<ReviewError> for ApiError {
    fn from(e: ReviewError) -> Self {
        let status = match &e {
            ReviewError::UnknownRun(_) | ReviewError::UnknownItem { .. } => StatusCode::NOT_FOUND,
            ReviewError::DuplicateRun(_) | ReviewError::Conflict { .. } => StatusCode::CONFLICT,
            ReviewError::Invalid(_) => StatusCode::BAD_REQUEST,
            ReviewError::Io { .. } | ReviewError::Corrupt { .. } => {
                StatusCode::INTERNAL_SERVER_ERROR
            }
        };
        if status.is_server_error() {
            log::error!("{e}");
        }
        ApiError(status, e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.0, Json(json!({ "error": self.1 }))).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

/// Run a store call off the async workers; decisions fsync before returning.
async fn blocking<T: Send + 'static>(
    f: impl FnOnce() -> Result<T, ReviewError> + Send + 'static,
) -> ApiResult<T> {
    match tokio::task::spawn_blocking(f).await {
        Ok(r) => r.map_err(ApiError::from),
        Err(e) => Err(ApiError(
            StatusCode::INTERNAL_SERVER_ERROR,
            format!("worker failed: {e}"),
        )),
    }
}

#[derive(Debug, Deserialize)]
#[serde(untagged, deny_unknown_fields)]
enum CreateRun {
    FromRunFile {
        run_id: String,
        run: String,
        #[serde(default)]
        dataset: Option<String>,
    },
    FromTriples {
        run_id: String,
        triples: Vec<Triple>,
        #[serde(default)]
        documents: HashMap<String, String>,
    },
}

async fn list_runs(State(s): State<AppState>) -> ApiResult<impl IntoResponse> {
    let store = s.store.clone();
    let runs = blocking(move || Ok(store.list())).await?;
    Ok(Json(json!({ "runs": runs })))
}

async fn create_run(
    State(s): State<AppState>,
    body: Result<Json<CreateRun>, axum::extract::rejection::JsonRejection>,
) -> ApiResult<impl IntoResponse> {
    let Json(body) = body.map_err(|e| ApiError::bad_request(e.body_text()))?;
    let store = s.store.clone();
    let summary = blocking(move || match body {
        CreateRun::FromRunFile {
            run_id,
            run,
            dataset,
        } => {
            let run = read_run(run.as_bytes())
                .map_err(|e| ReviewError::Invalid(format!("run file: {e}")))?;
            let corpus = dataset
                .map(|d| read_dataset(d.as_bytes(), "upload"))
                .transpose()
                .map_err(|e| ReviewError::Invalid(format!("dataset file: {e}")))?;
            create_review(&store, &run_id, &run, corpus.as_ref())
        }
        CreateRun::FromTriples {
            run_id,
            triples,
            documents,
        } => store.create(&run_id, &triples, &documents),
    })
    .await?;
    Ok((StatusCode::CREATED, Json(summary)))
}

#[derive(Debug, Deserialize)]
struct ItemsQuery {
    status: Option<String>,
    page: Option<usize>,
    page_size: Option<usize>,
}

async fn list_items(
    State(s): State<AppState>,
    Path(run_id): Path<String>,
    Query(q): Query<ItemsQuery>,
) -> ApiResult<impl IntoResponse> {
    let status = q
        .status
        .filter(|x| !x.is_empty() && x != "all")
        .map(|x| x.parse::<ReviewStatus>())
        .transpose()
        .map_err(ApiError::bad_request)?;
    let page_size = q.page_size.unwrap_or(s.page_size);
    if page_size > MAX_PAGE_SIZE {
        return Err(ApiError::bad_request(format!(
            "page_size is limited to {MAX_PAGE_SIZE}"
        )));
    }
    let store = s.store.clone();
    let page =
        blocking(move || store.items(&run_id, status, q.page.unwrap_or(1), page_size)).await?;
    Ok(Json(page))
}

#[derive(Debug, Deserialize)]
struct DecisionBody {
    #[serde(flatten)]
    decision: Decision,
    reviewer: String,
}

async fn decide(
    State(s): State<AppState>,
    Path((run_id, item_id)): Path<(String, String)>,
    body: Result<Json<DecisionBody>, axum::extract::rejection::JsonRejection>,
) -> ApiResult<impl IntoResponse> {
    let Json(body) = body.map_err(|e| ApiError::bad_request(e.body_text()))?;
    if body.reviewer.trim().is_empty() {
        return Err(ApiError::bad_request("reviewer is required"));
    }
    let store = s.store.clone();
    let item =
        blocking(move || store.decide(&run_id, &item_id, body.decision, &body.reviewer)).await?;
    Ok(Json(item))
}

async fn stats(
    State(s): State<AppState>,
    Path(run_id): Path<String>,
) -> ApiResult<impl IntoResponse> {
    let store = s.store.clone();
    let stats = blocking(move || store.stats(&run_id)).await?;
    Ok(Json(stats))
}

#[derive(Debug, Deserialize)]
struct ExportQuery {
    status: Option<String>,
}

async fn export(
    State(s): State<AppState>,
    Path(run_id): Path<String>,
    Query(q): Query<ExportQuery>,
) -> ApiResult<impl IntoResponse> {
    if let Some(st) = q.status.as_deref().filter(|st| *st != "accepted") {
        return Err(ApiError::bad_request(format!(
            "only status=accepted can be exported, got `{st}`"
        )));
    }
    let store = s.store.clone();
    let id = run_id.clone();
    let triples = blocking(move || store.export_accepted(&id)).await?;
    Ok(Json(json!({ "run_id": run_id, "triples": triples })))
}

const FALLBACK_INDEX: &str = "<!doctype html>\n<html><head><meta charset=\"utf-8\"><title>Review</title></head>\n\
<body><p>No review UI bundle is configured. The API is available under <a href=\"/runs\">/runs</a>.</p></body></html>\n";

async fn fallback_index() -> Html<&'static str> {
    Html(FALLBACK_INDEX)
}

pub fn router(store: Arc<ReviewStore>, settings: &ServerSettings) -> Router {
    let state = AppState {
        store,
        page_size: settings.page_size.clamp(1, MAX_PAGE_SIZE),
    };
    let api = Router::new()
        .route("/runs", get(list_runs).post(create_run))
        .route("/runs/{run_id}/items", get(list_items))
        .route("/runs/{run_id}/items/{item_id}/decision", post(decide))
        .route("/runs/{run_id}/stats", get(stats))
        .route("/runs/{run_id}/export", get(export))
        .with_state(state);
    match &settings.ui_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api.route("/", get(fallback_index)),
    }
}

/// Serve until interrupted. Blocks the calling thread.
pub fn run_server(
    listen: &str,
    store: Arc<ReviewStore>,
    settings: &ServerSettings,
) -> std::io::Result<()> {
    let app = router(store, settings);
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(async move {
        let listener = tokio::net::TcpListener::bind(listen).await?;
        log::info!(
            "review service listening on http://{}",
            listener.local_addr()?
        );
        axum::serve(listener, app)
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await
    })
}
