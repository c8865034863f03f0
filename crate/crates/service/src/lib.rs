//! HTTP front end: create a project from an SRS (and optionally a domain
//! corpus), wait for its indexes, then ask questions against it.
//!
//! | method | path | |
//! |---|---|---|
//! | POST | `/projects` | create; indexing runs in the background (202) |
//! | GET | `/projects/{id}/status` | `indexing`, `ready` or `failed` |
//! | POST | `/projects/{id}/questions` | answer a question (409 until ready) |
//! | GET | `/projects/{id}/passages/{pid}` | one SRS or corpus passage |
//! | GET | `/health` | liveness |

pub mod store;

use std::sync::Arc;

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use qassist_core::pipeline::{PipelineConfig, QAResult};
use qassist_core::retrieval::Corpus;
use qassist_core::textseg::{split_passages, Document, Passage, Source};
use serde::{Deserialize, Serialize};
use serde_json::json;

pub use store::{Manifest, ProjectStatus, Registry, StoreError};
use store::{Prepared, State as BuildState};

#[derive(Debug, thiserror::Error)]
pub enum ApiError {
    #[error("{0}")]
    BadRequest(String),
    #[error("{0}")]
    NotFound(String),
    #[error("{0}")]
    Conflict(String),
    #[error("{0}")]
    Internal(String),
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = match &self {
            ApiError::BadRequest(_) => StatusCode::BAD_REQUEST,
            ApiError::NotFound(_) => StatusCode::NOT_FOUND,
            ApiError::Conflict(_) => StatusCode::CONFLICT,
            ApiError::Internal(_) => StatusCode::INTERNAL_SERVER_ERROR,
        };
        (status, Json(json!({ "error": self.to_string() }))).into_response()
    }
}

impl From<JsonRejection> for ApiError {
    fn from(r: JsonRejection) -> Self {
        ApiError::BadRequest(r.body_text())
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CreateProject {
    #[serde(default)]
    pub name: Option<String>,
    /// Document id of the SRS; defaults to `srs`.
    #[serde(default)]
    pub srs_id: Option<String>,
    /// Plain text; paragraphs are separated by blank lines.
    pub srs_text: String,
    #[serde(default)]
    pub corpus: Option<Corpus>,
    #[serde(default)]
    pub config: PipelineConfig,
}

#[derive(Debug, Clone, Serialize)]
pub struct ProjectInfo {
    pub id: String,
    pub name: String,
    pub status: ProjectStatus,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AskRequest {
    pub question: String,
    #[serde(default)]
    pub k: Option<usize>,
}

pub fn router(registry: Arc<Registry>) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/projects", post(create_project))
        .route("/projects/{id}/status", get(project_status))
        .route("/projects/{id}/questions", post(ask))
        .route("/projects/{id}/passages/{pid}", get(passage))
        .with_state(registry)
}

/// Serves until the listener fails.
pub async fn serve(listener: tokio::net::TcpListener, registry: Arc<Registry>) -> std::io::Result<()> {
    axum::serve(listener, router(registry)).await
}

async fn health(State(registry): State<Arc<Registry>>) -> Json<serde_json::Value> {
    Json(json!({ "status": "ok", "projects": registry.len() }))
}

async fn create_project(
    State(registry): State<Arc<Registry>>,
    body: Result<Json<CreateProject>, JsonRejection>,
) -> Result<(StatusCode, Json<ProjectInfo>), ApiError> {
    let Json(req) = body?;
    req.config.validate().map_err(|e| ApiError::BadRequest(e.to_string()))?;
    let srs = Document::from_plain_text(req.srs_id.unwrap_or_else(|| "srs".into()), &req.srs_text);
    if srs.is_empty() {
        return Err(ApiError::BadRequest("srs_text is empty".into()));
    }
    let corpus = req.corpus.unwrap_or_else(|| Corpus {
        domain: "default".into(),
        documents: Vec::new(),
    });
    corpus.validate().map_err(|e| ApiError::BadRequest(e.to_string()))?;
    let id = registry.next_id();
    let project = registry.add(Manifest {
        name: req.name.unwrap_or_else(|| id.clone()),
        id,
        srs,
        corpus,
        config: req.config,
    });
    let info = ProjectInfo {
        id: project.manifest.id.clone(),
        name: project.manifest.name.clone(),
        status: project.status(),
    };
    let worker = registry.clone();
    tokio::task::spawn_blocking(move || worker.build_project(&project));
    Ok((StatusCode::ACCEPTED, Json(info)))
}

fn find_project(registry: &Registry, id: &str) -> Result<Arc<store::Project>, ApiError> {
    registry.get(id).ok_or_else(|| ApiError::NotFound(format!("no project `{id}`")))
}

fn ready(project: &store::Project) -> Result<Arc<Prepared>, ApiError> {
    match project.state() {
        BuildState::Ready(p) => Ok(p),
        BuildState::Indexing => Err(ApiError::Conflict(format!("project `{}` is still indexing", project.manifest.id))),
        BuildState::Failed(e) => Err(ApiError::Conflict(format!("project `{}` failed to index: {e}", project.manifest.id))),
    }
}

async fn project_status(
    State(registry): State<Arc<Registry>>,
    Path(id): Path<String>,
) -> Result<Json<ProjectInfo>, ApiError> {
    let project = find_project(&registry, &id)?;
    Ok(Json(ProjectInfo {
        id: project.manifest.id.clone(),
        name: project.manifest.name.clone(),
        status: project.status(),
    }))
}

async fn ask(
    State(registry): State<Arc<Registry>>,
    Path(id): Path<String>,
    body: Result<Json<AskRequest>, JsonRejection>,
) -> Result<Json<QAResult>, ApiError> {
    let project = find_project(&registry, &id)?;
    let Json(req) = body?;
    if req.question.trim().is_empty() {
        return Err(ApiError::BadRequest("question is empty".into()));
    }
    if req.k == Some(0) {
        return Err(ApiError::BadRequest("k must be at least 1".into()));
    }
    let prepared = ready(&project)?;
    let result = tokio::task::spawn_blocking(move || {
        prepared.engine.ask_prepared(&req.question, &prepared.srs, &prepared.corpus, req.k)
    })
    .await
    .map_err(|e| ApiError::Internal(e.to_string()))?
    .map_err(|e| ApiError::Internal(e.to_string()))?;
    Ok(Json(result))
}

async fn passage(
    State(registry): State<Arc<Registry>>,
    Path((id, pid)): Path<(String, String)>,
) -> Result<Json<Passage>, ApiError> {
    let project = find_project(&registry, &id)?;
    let prepared = ready(&project)?;
    if let Some(p) = prepared.srs.passage(&pid) {
        return Ok(Json(p.clone()));
    }
    // corpus passage ids are `<doc id>#<ordinal>` over the document split alone
    let not_found = || ApiError::NotFound(format!("no passage `{pid}` in project `{id}`"));
    let (doc_id, _) = pid.rsplit_once('#').ok_or_else(not_found)?;
    let doc = prepared.corpus.corpus.get(doc_id).ok_or_else(not_found)?;
    let split = prepared.engine.config.split_config();
    split_passages(&Document::from_plain_text(&doc.id, &doc.text), Source::Corpus, &split)
        .into_iter()
        .find(|p| p.id == pid)
        .map(Json)
        .ok_or_else(not_found)
}
