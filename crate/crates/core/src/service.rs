//! JSON-over-HTTP interface for interactive review sessions.
//!
//! Sessions live in memory. Only the `.Revised` tree is ever written.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use axum::body::Bytes;
use axum::extract::{Path as UrlPath, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use rust_decimal::Decimal;
use serde::{Deserialize, Serialize};
use serde_json::json;
use sha2::{Digest, Sha256};

use crate::diff::{diff_texts, DiffLine, DiffMetrics, DiffOptions};
use crate::issues::{read_csv, IssueRecord, IssueType};
use crate::orchestrator::{
    resolve_under, revised_relative_path, revised_root_path, FailureKind, Orchestrator, OrchestratorError,
    RevisionResult, RevisionStatus,
};
use crate::prompt::{infer_language, Mode, PromptError, PromptSpec};
use crate::sonar::count_by_type;

pub struct AppState {
    orchestrator: Arc<Orchestrator>,
    default_root: Option<PathBuf>,
    sessions: Mutex<BTreeMap<String, Arc<Session>>>,
    counter: AtomicU64,
}

struct Session {
    project_root: PathBuf,
    issues: Vec<IssueRecord>,
    state: Mutex<SessionState>,
}

#[derive(Default)]
struct SessionState {
    revisions: BTreeMap<String, RevisionResult>,
    history: Vec<RevisionResult>,
    in_flight: BTreeSet<String>,
}

impl Session {
    fn issues_for(&self, file_location: &str) -> Vec<IssueRecord> {
        let mut v: Vec<IssueRecord> = self
            .issues
            .iter()
            .filter(|i| i.file_location == file_location)
            .cloned()
            .collect();
        v.sort_by(|a, b| (a.line, &a.message).cmp(&(b.line, &b.message)));
        v
    }
}

impl AppState {
    pub fn new(orchestrator: Arc<Orchestrator>, default_root: Option<PathBuf>) -> Arc<Self> {
        Arc::new(AppState {
            orchestrator,
            default_root,
            sessions: Mutex::new(BTreeMap::new()),
            counter: AtomicU64::new(0),
        })
    }

    fn session(&self, id: &str) -> Result<Arc<Session>, ApiError> {
        self.sessions
            .lock()
            .expect("session map poisoned")
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, format!("unknown session `{id}`")))
    }
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    body: serde_json::Value,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        ApiError {
            status,
            body: json!({ "error": message.into() }),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body)).into_response()
    }
}

impl From<OrchestratorError> for ApiError {
    fn from(e: OrchestratorError) -> Self {
        let status = match &e {
            OrchestratorError::UnknownModel(_) => StatusCode::BAD_REQUEST,
            OrchestratorError::Prompt(PromptError::PromptTooLarge { .. }) => StatusCode::UNPROCESSABLE_ENTITY,
            OrchestratorError::Prompt(_) => StatusCode::BAD_REQUEST,
            OrchestratorError::MissingFile(_) | OrchestratorError::OutsideRoot(_) => StatusCode::NOT_FOUND,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        let kind = match &e {
            OrchestratorError::UnknownModel(_) => "unknown_model",
            OrchestratorError::Prompt(PromptError::PromptTooLarge { .. }) => "prompt_too_large",
            OrchestratorError::MissingFile(_) => "missing_file",
            _ => "error",
        };
        ApiError {
            status,
            body: json!({ "error": e.to_string(), "kind": kind }),
        }
    }
}

type ApiResult<T> = Result<Json<T>, ApiError>;

pub fn router(state: Arc<AppState>, static_dir: Option<&Path>) -> Router {
    let api = Router::new()
        .route("/api/health", get(health))
        .route("/api/models", get(models))
        .route("/api/sessions", post(upload_csv))
        .route("/api/sessions/{id}/files", get(list_files))
        .route("/api/sessions/{id}/files/{*path}", get(get_file))
        .route("/api/sessions/{id}/prompt/preview", post(preview_prompt))
        .route("/api/sessions/{id}/revise", post(revise))
        .route("/api/sessions/{id}/save", post(save_revision))
        .route("/api/sessions/{id}/report", get(report))
        .with_state(state);
    match static_dir {
        Some(dir) => api.fallback_service(tower_http::services::ServeDir::new(dir)),
        None => api,
    }
}

/// Binds and serves until the process is stopped.
pub async fn serve(state: Arc<AppState>, static_dir: Option<&Path>, addr: std::net::SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(state, static_dir)).await
}

async fn health() -> Json<serde_json::Value> {
    Json(json!({ "status": "ok" }))
}

#[derive(Serialize)]
struct ModelInfo {
    model_id: String,
    provider: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    input_price_per_1k: Option<Decimal>,
    #[serde(skip_serializing_if = "Option::is_none")]
    output_price_per_1k: Option<Decimal>,
}

async fn models(State(st): State<Arc<AppState>>) -> Json<Vec<ModelInfo>> {
    let gw = st.orchestrator.gateway();
    Json(
        gw.models()
            .into_iter()
            .map(|m| {
                let price = gw.pricing().get(&m);
                ModelInfo {
                    provider: gw.provider_of(&m).unwrap_or_default().to_string(),
                    input_price_per_1k: price.map(|p| p.input_price_per_1k_tokens),
                    output_price_per_1k: price.map(|p| p.output_price_per_1k_tokens),
                    model_id: m,
                }
            })
            .collect(),
    )
}

#[derive(Deserialize)]
struct UploadParams {
    project_root: Option<PathBuf>,
}

#[derive(Serialize, Deserialize, Debug, PartialEq)]
pub struct SessionSummary {
    pub session_id: String,
    pub counts: BTreeMap<IssueType, usize>,
    pub files: usize,
}

async fn upload_csv(
    State(st): State<Arc<AppState>>,
    Query(params): Query<UploadParams>,
    body: Bytes,
) -> ApiResult<SessionSummary> {
    let issues = read_csv(&body[..]).map_err(|e| ApiError {
        status: StatusCode::BAD_REQUEST,
        body: json!({ "error": e.to_string(), "row": e.row() }),
    })?;
    let project_root = params
        .project_root
        .or_else(|| st.default_root.clone())
        .ok_or_else(|| ApiError::new(StatusCode::BAD_REQUEST, "project_root is required"))?;
    let n = st.counter.fetch_add(1, Ordering::SeqCst);
    let mut h = Sha256::new();
    h.update(&body);
    h.update(n.to_le_bytes());
    let session_id = hex::encode(&h.finalize()[..16]);
    let files = issues.iter().map(|i| &i.file_location).collect::<BTreeSet<_>>().len();
    let summary = SessionSummary {
        session_id: session_id.clone(),
        counts: count_by_type(&issues),
        files,
    };
    st.sessions.lock().expect("session map poisoned").insert(
        session_id,
        Arc::new(Session {
            project_root,
            issues,
            state: Mutex::new(SessionState::default()),
        }),
    );
    Ok(Json(summary))
}

#[derive(Serialize, Deserialize, Debug, PartialEq)]
pub struct FileSummary {
    pub file_location: String,
    pub file_name: String,
    pub issues: usize,
    pub counts: BTreeMap<IssueType, usize>,
}

async fn list_files(State(st): State<Arc<AppState>>, UrlPath(id): UrlPath<String>) -> ApiResult<Vec<FileSummary>> {
    let s = st.session(&id)?;
    let mut by_file: BTreeMap<&str, Vec<IssueRecord>> = BTreeMap::new();
    for i in &s.issues {
        by_file.entry(&i.file_location).or_default().push(i.clone());
    }
    Ok(Json(
        by_file
            .into_iter()
            .map(|(loc, v)| FileSummary {
                file_location: loc.to_string(),
                file_name: v[0].file_name.clone(),
                issues: v.len(),
                counts: count_by_type(&v),
            })
            .collect(),
    ))
}

#[derive(Serialize, Deserialize, Debug)]
pub struct FileView {
    pub file_location: String,
    pub language: String,
    pub content: String,
    pub issues: Vec<IssueRecord>,
}

fn known_file(s: &Session, path: &str) -> Result<(), ApiError> {
    if s.issues.iter().any(|i| i.file_location == path) {
        Ok(())
    } else {
        Err(ApiError::new(StatusCode::NOT_FOUND, format!("file `{path}` is not in this session")))
    }
}

fn read_original(s: &Session, path: &str) -> Result<String, ApiError> {
    let full = resolve_under(&s.project_root, path)?;
    let bytes = std::fs::read(&full)
        .map_err(|e| ApiError::new(StatusCode::NOT_FOUND, format!("cannot read `{path}`: {e}")))?;
    Ok(String::from_utf8_lossy(&bytes).into_owned())
}

async fn get_file(
    State(st): State<Arc<AppState>>,
    UrlPath((id, path)): UrlPath<(String, String)>,
) -> ApiResult<FileView> {
    let s = st.session(&id)?;
    known_file(&s, &path)?;
    let content = read_original(&s, &path)?;
    let issues = s.issues_for(&path);
    Ok(Json(FileView {
        language: infer_language(&path).to_string(),
        file_location: path,
        content,
        issues,
    }))
}

#[derive(Deserialize)]
struct PreviewRequest {
    file_location: String,
    #[serde(default = "batch")]
    mode: Mode,
}

fn batch() -> Mode {
    Mode::Batch
}

async fn preview_prompt(
    State(st): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
    Json(req): Json<PreviewRequest>,
) -> ApiResult<PromptSpec> {
    let s = st.session(&id)?;
    known_file(&s, &req.file_location)?;
    let content = read_original(&s, &req.file_location)?;
    let spec = st
        .orchestrator
        .builder()
        .build(&content, &s.issues_for(&req.file_location), req.mode, None)
        .map_err(OrchestratorError::from)?;
    Ok(Json(spec))
}

#[derive(Deserialize)]
struct ReviseRequest {
    file_location: String,
    model_id: String,
    #[serde(default = "batch")]
    mode: Mode,
    #[serde(default)]
    prompt_override: Option<String>,
}

#[derive(Serialize, Deserialize, Debug)]
pub struct RevisePayload {
    pub revision: RevisionResult,
    pub revised_content: String,
    pub diff: Vec<DiffLine>,
    pub metrics: DiffMetrics,
}

/// Clears the in-flight mark when dropped.
struct InFlight<'a> {
    session: &'a Session,
    file: String,
}

impl Drop for InFlight<'_> {
    fn drop(&mut self) {
        if let Ok(mut g) = self.session.state.lock() {
            g.in_flight.remove(&self.file);
        }
    }
}

async fn revise(
    State(st): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
    Json(req): Json<ReviseRequest>,
) -> ApiResult<RevisePayload> {
    let s = st.session(&id)?;
    known_file(&s, &req.file_location)?;
    if req.mode == Mode::Batch && req.prompt_override.is_some() {
        return Err(ApiError::new(
            StatusCode::BAD_REQUEST,
            "batch-mode prompts are fixed; switch to interactive mode to edit the prompt",
        ));
    }
    if !st.orchestrator.gateway().has_model(&req.model_id) {
        return Err(OrchestratorError::UnknownModel(req.model_id).into());
    }
    {
        let mut g = s.state.lock().expect("session state poisoned");
        if !g.in_flight.insert(req.file_location.clone()) {
            return Err(ApiError::new(
                StatusCode::CONFLICT,
                format!("a revision of `{}` is already running", req.file_location),
            ));
        }
    }
    let _guard = InFlight {
        session: &s,
        file: req.file_location.clone(),
    };
    let original = read_original(&s, &req.file_location)?;
    let issues = s.issues_for(&req.file_location);
    let result = st
        .orchestrator
        .revise_content(&original, &issues, &req.model_id, req.mode, req.prompt_override.as_deref())
        .await?;
    {
        let mut g = s.state.lock().expect("session state poisoned");
        g.history.push(result.clone());
        if result.status != RevisionStatus::Failed {
            g.revisions.insert(req.file_location.clone(), result.clone());
        }
    }
    if result.status == RevisionStatus::Failed {
        return Err(ApiError {
            status: StatusCode::BAD_GATEWAY,
            body: json!({
                "error": result.diagnostic.clone().unwrap_or_default(),
                "kind": result.failure.unwrap_or(FailureKind::Provider),
                "attempts": result.attempts,
            }),
        });
    }
    let report = diff_texts(&original, &result.revised_content, DiffOptions::default());
    Ok(Json(RevisePayload {
        revised_content: result.revised_content.clone(),
        revision: result,
        diff: report.rows,
        metrics: report.metrics,
    }))
}

#[derive(Deserialize)]
struct SaveRequest {
    file_location: String,
}

#[derive(Serialize, Deserialize, Debug)]
pub struct SaveResponse {
    pub saved_path: String,
}

async fn save_revision(
    State(st): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
    Json(req): Json<SaveRequest>,
) -> ApiResult<SaveResponse> {
    let s = st.session(&id)?;
    known_file(&s, &req.file_location)?;
    let content = {
        let g = s.state.lock().expect("session state poisoned");
        match g.revisions.get(&req.file_location) {
            Some(r) if r.status == RevisionStatus::Revised => r.revised_content.clone(),
            _ => {
                return Err(ApiError::new(
                    StatusCode::CONFLICT,
                    format!("no revised version of `{}` to save", req.file_location),
                ))
            }
        }
    };
    let internal = |e: String| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e);
    let out_root = revised_root_path(&s.project_root).map_err(|e| internal(e.to_string()))?;
    let rel = revised_relative_path(&req.file_location).map_err(|e| internal(e.to_string()))?;
    let dest = out_root.join(&rel);
    if let Some(parent) = dest.parent() {
        std::fs::create_dir_all(parent).map_err(|e| internal(e.to_string()))?;
    }
    std::fs::write(&dest, content).map_err(|e| internal(e.to_string()))?;
    Ok(Json(SaveResponse {
        saved_path: dest.display().to_string(),
    }))
}

#[derive(Serialize, Deserialize, Debug, PartialEq)]
pub struct ReportRow {
    pub model_id: String,
    pub issue_type: IssueType,
    pub revisions: usize,
    pub issues: usize,
    pub cost: Decimal,
}

#[derive(Serialize, Deserialize, Debug, PartialEq)]
pub struct SessionReport {
    pub revisions: usize,
    pub total_cost: Decimal,
    pub by_model: BTreeMap<String, Decimal>,
    pub rows: Vec<ReportRow>,
}

async fn report(State(st): State<Arc<AppState>>, UrlPath(id): UrlPath<String>) -> ApiResult<SessionReport> {
    let s = st.session(&id)?;
    let history = s.state.lock().expect("session state poisoned").history.clone();
    let mut by_model: BTreeMap<String, Decimal> = BTreeMap::new();
    let mut cells: BTreeMap<(String, IssueType), (usize, usize, Decimal)> = BTreeMap::new();
    for r in &history {
        *by_model.entry(r.model_id.clone()).or_default() += r.cost;
        let split = crate::orchestrator::cost_by_type(std::slice::from_ref(r));
        for ty in IssueType::ALL {
            let n = r.issues_targeted.iter().filter(|i| i.issue_type == ty).count();
            if n == 0 {
                continue;
            }
            let c = cells.entry((r.model_id.clone(), ty)).or_default();
            c.0 += 1;
            c.1 += n;
            c.2 += split.get(&ty).copied().unwrap_or_default();
        }
    }
    Ok(Json(SessionReport {
        revisions: history.len(),
        total_cost: history.iter().map(|r| r.cost).sum(),
        by_model,
        rows: cells
            .into_iter()
            .map(|((model_id, issue_type), (revisions, issues, cost))| ReportRow {
                model_id,
                issue_type,
                revisions,
                issues,
                cost,
            })
            .collect(),
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn api_error_status_mapping() {
        let e: ApiError = OrchestratorError::UnknownModel("x".into()).into();
        assert_eq!(e.status, StatusCode::BAD_REQUEST);
        let e: ApiError = OrchestratorError::Prompt(PromptError::PromptTooLarge { estimated: 2, budget: 1 }).into();
        assert_eq!(e.status, StatusCode::UNPROCESSABLE_ENTITY);
        assert_eq!(e.body["kind"], "prompt_too_large");
    }
}
