//! HTTP API.
//!
//! | method | path | body / query | response |
//! |---|---|---|---|
//! | POST | `/collections` | manifest | collection |
//! | GET | `/collections/{id}` | | collection |
//! | GET | `/documents/{id}` | `start`, `end` | document text and resolved span |
//! | POST | `/notebooks` | `{collection_id, goal?}` | notebook |
//! | GET | `/notebooks/{id}` | | notebook |
//! | POST | `/notebooks/{id}/cells` | cell command | `{cell_id, notebook}` |
//! | POST | `/cells/{id}/execute` | | NDJSON event stream |
//! | POST | `/notebooks/{id}/cells/{cid}/edit` | `{doc_id, column, edit}` | notebook |
//! | POST | `/notebooks/{id}/suggestions/{sid}/accept` | `{kind, index}` | `{cell_id, notebook}` |
//! | POST | `/notebooks/{id}/suggestions/{sid}/dismiss` | | notebook |
//! | GET | `/notebooks/{id}/table` | `columns`, `order` | aggregate table |
//! | GET | `/notebooks/{id}/table.csv` | `columns`, `order` | CSV |
//!
//! `columns` and `order` are comma-separated column labels. Errors are
//! `{"error": message}` with a 4xx/5xx status.

use std::convert::Infallible;
use std::future::Future;
use std::sync::Arc;

use axum::body::Body;
use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, Query, State};
use axum::http::{header, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use forage_core::corpus::{CollectionId, CorpusError, DocId};
use forage_core::engine::ActionError;
use forage_core::llm::GatewayError;
use forage_core::notebook::{CellCommand, CellId, NotebookError, NotebookId, ResultEdit};
use forage_core::store::StoreError;
use forage_core::suggestions::SuggestionItem;
use forage_core::table::TableError;
use futures::StreamExt;
use serde::Deserialize;
use serde_json::{json, Value};

use crate::workspace::{Workspace, WorkspaceError};

pub const NDJSON: &str = "application/x-ndjson";

pub struct ApiError(StatusCode, String);

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.0, Json(json!({ "error": self.1 }))).into_response()
    }
}

impl From<WorkspaceError> for ApiError {
    fn from(err: WorkspaceError) -> Self {
        use WorkspaceError as W;
        let status = match &err {
            W::NotFound(_) | W::Store(StoreError::NotFound { .. }) => StatusCode::NOT_FOUND,
            W::Store(_) | W::Backend(_) => StatusCode::INTERNAL_SERVER_ERROR,
            W::Corpus(CorpusError::UnknownDocument(_)) => StatusCode::NOT_FOUND,
            W::Corpus(_) => StatusCode::BAD_REQUEST,
            W::Index(_) => StatusCode::BAD_GATEWAY,
            W::Notebook(
                NotebookError::UnknownCell(_) | NotebookError::UnknownRow(_) | NotebookError::UnknownColumn(_),
            ) => StatusCode::NOT_FOUND,
            W::Notebook(NotebookError::AlreadyResolved(_)) => StatusCode::CONFLICT,
            W::Notebook(_) => StatusCode::BAD_REQUEST,
            W::Table(TableError::UnknownColumn(_)) => StatusCode::BAD_REQUEST,
            W::Action(ActionError::Gateway(GatewayError::BackendUnavailable(_)) | ActionError::Index(_)) => {
                StatusCode::BAD_GATEWAY
            }
            W::Action(_) => StatusCode::BAD_REQUEST,
        };
        ApiError(status, err.to_string())
    }
}

impl From<JsonRejection> for ApiError {
    fn from(rej: JsonRejection) -> Self {
        ApiError(StatusCode::BAD_REQUEST, rej.body_text())
    }
}

type ApiResult<T> = Result<T, ApiError>;
type AppState = State<Arc<Workspace>>;

pub fn router(workspace: Arc<Workspace>) -> Router {
    Router::new()
        .route("/collections", post(create_collection))
        .route("/collections/{id}", get(get_collection))
        .route("/documents/{id}", get(get_document))
        .route("/notebooks", post(create_notebook))
        .route("/notebooks/{id}", get(get_notebook))
        .route("/notebooks/{id}/cells", post(cell_command))
        .route("/cells/{id}/execute", post(execute_cell))
        .route("/notebooks/{id}/cells/{cid}/edit", post(edit_cell))
        .route("/notebooks/{id}/suggestions/{sid}/accept", post(accept_suggestion))
        .route("/notebooks/{id}/suggestions/{sid}/dismiss", post(dismiss_suggestion))
        .route("/notebooks/{id}/table", get(get_table))
        .route("/notebooks/{id}/table.csv", get(get_table_csv))
        .with_state(workspace)
}

/// Serve until `shutdown` resolves, then let in-flight actions finish.
pub async fn serve(
    workspace: Arc<Workspace>,
    listener: tokio::net::TcpListener,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    axum::serve(listener, router(workspace.clone())).with_graceful_shutdown(shutdown).await?;
    workspace.drain().await;
    Ok(())
}

async fn create_collection(State(ws): AppState, body: Result<Json<Value>, JsonRejection>) -> ApiResult<Response> {
    let Json(manifest) = body?;
    let collection = ws.ingest(&manifest, None, None).await?;
    Ok((StatusCode::CREATED, Json(collection)).into_response())
}

async fn get_collection(State(ws): AppState, Path(id): Path<String>) -> ApiResult<Response> {
    Ok(Json(ws.collection(&CollectionId(id)).await?.as_ref()).into_response())
}

#[derive(Deserialize)]
struct SpanQuery {
    start: Option<usize>,
    end: Option<usize>,
}

async fn get_document(State(ws): AppState, Path(id): Path<String>, Query(q): Query<SpanQuery>) -> ApiResult<Response> {
    let span = match (q.start, q.end) {
        (Some(s), Some(e)) => Some((s, e)),
        (None, None) => None,
        _ => return Err(ApiError(StatusCode::BAD_REQUEST, "start and end go together".into())),
    };
    Ok(Json(ws.document(&DocId(id), span).await?).into_response())
}

#[derive(Deserialize)]
struct NewNotebook {
    collection_id: CollectionId,
    goal: Option<String>,
}

async fn create_notebook(State(ws): AppState, body: Result<Json<NewNotebook>, JsonRejection>) -> ApiResult<Response> {
    let Json(req) = body?;
    let notebook = ws.create_notebook(&req.collection_id, req.goal).await?;
    Ok((StatusCode::CREATED, Json(notebook)).into_response())
}

async fn get_notebook(State(ws): AppState, Path(id): Path<String>) -> ApiResult<Response> {
    Ok(Json(ws.notebook(&NotebookId(id))?).into_response())
}

async fn cell_command(
    State(ws): AppState,
    Path(id): Path<String>,
    body: Result<Json<CellCommand>, JsonRejection>,
) -> ApiResult<Response> {
    let Json(command) = body?;
    let (cell_id, notebook) = ws.apply(&NotebookId(id), command).await?;
    Ok(Json(json!({ "cell_id": cell_id, "notebook": notebook })).into_response())
}

async fn execute_cell(State(ws): AppState, Path(id): Path<String>) -> ApiResult<Response> {
    let (action_id, events) = ws.execute_cell(&CellId(id)).await?;
    let body = Body::from_stream(events.map(|e| Ok::<_, Infallible>(e.to_ndjson())));
    let mut response = Response::new(body);
    let headers = response.headers_mut();
    headers.insert(header::CONTENT_TYPE, HeaderValue::from_static(NDJSON));
    if let Ok(v) = HeaderValue::from_str(&action_id) {
        headers.insert("x-action-id", v);
    }
    Ok(response)
}

#[derive(Deserialize)]
struct EditRequest {
    doc_id: DocId,
    column: String,
    edit: ResultEdit,
}

async fn edit_cell(
    State(ws): AppState,
    Path((id, cid)): Path<(String, String)>,
    body: Result<Json<EditRequest>, JsonRejection>,
) -> ApiResult<Response> {
    let Json(req) = body?;
    let notebook = ws.edit(&NotebookId(id), &CellId(cid), &req.doc_id, &req.column, req.edit).await?;
    Ok(Json(notebook).into_response())
}

async fn accept_suggestion(
    State(ws): AppState,
    Path((id, sid)): Path<(String, String)>,
    body: Result<Json<SuggestionItem>, JsonRejection>,
) -> ApiResult<Response> {
    let Json(item) = body?;
    let (cell_id, notebook) = ws.accept(&NotebookId(id), &CellId(sid), item).await?;
    Ok(Json(json!({ "cell_id": cell_id, "notebook": notebook })).into_response())
}

async fn dismiss_suggestion(State(ws): AppState, Path((id, sid)): Path<(String, String)>) -> ApiResult<Response> {
    Ok(Json(ws.dismiss(&NotebookId(id), &CellId(sid)).await?).into_response())
}

#[derive(Deserialize)]
struct TableQuery {
    columns: Option<String>,
    order: Option<String>,
}

fn labels(param: &Option<String>) -> Option<Vec<String>> {
    param.as_ref().map(|p| p.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect())
}

async fn get_table(State(ws): AppState, Path(id): Path<String>, Query(q): Query<TableQuery>) -> ApiResult<Response> {
    let (columns, order) = (labels(&q.columns), labels(&q.order));
    let table = ws.table(&NotebookId(id), columns.as_deref(), order.as_deref()).await?;
    Ok(Json(table).into_response())
}

async fn get_table_csv(State(ws): AppState, Path(id): Path<String>, Query(q): Query<TableQuery>) -> ApiResult<Response> {
    let (columns, order) = (labels(&q.columns), labels(&q.order));
    let table = ws.table(&NotebookId(id), columns.as_deref(), order.as_deref()).await?;
    Ok(([(header::CONTENT_TYPE, "text/csv; charset=utf-8")], table.export_csv()).into_response())
}
