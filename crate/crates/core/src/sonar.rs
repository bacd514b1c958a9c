//! SonarQube Web API client (`/api/issues/search`) and an in-process mock server
//! speaking the same wire shape.

use std::collections::BTreeMap;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;
use url::Url;

use crate::issues::{sort_issues, IssueRecord, IssueType, RecordError};

/// Prefix applied to messages of issues reported without a line.
pub const FILE_LEVEL_PREFIX: &str = "[file-level] ";

/// SonarQube caps `p * ps` at this value.
const MAX_RESULT_WINDOW: usize = 10_000;

#[derive(Clone)]
pub struct ServerConfig {
    server_url: Url,
    api_token: String,
    project_key: String,
}

impl std::fmt::Debug for ServerConfig {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ServerConfig")
            .field("server_url", &self.server_url.as_str())
            .field("api_token", &"<redacted>")
            .field("project_key", &self.project_key)
            .finish()
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ConfigError {
    #[error("server url `{0}` is not an absolute http(s) url")]
    BadUrl(String),
    #[error("project key is empty")]
    EmptyProjectKey,
}

impl ServerConfig {
    pub fn new(
        server_url: &str,
        api_token: impl Into<String>,
        project_key: impl Into<String>,
    ) -> Result<Self, ConfigError> {
        let url = Url::parse(server_url).map_err(|_| ConfigError::BadUrl(server_url.to_string()))?;
        if !matches!(url.scheme(), "http" | "https") || url.host().is_none() {
            return Err(ConfigError::BadUrl(server_url.to_string()));
        }
        let project_key = project_key.into();
        if project_key.trim().is_empty() {
            return Err(ConfigError::EmptyProjectKey);
        }
        Ok(ServerConfig {
            server_url: url,
            api_token: api_token.into(),
            project_key,
        })
    }

    pub fn server_url(&self) -> &Url {
        &self.server_url
    }

    pub fn project_key(&self) -> &str {
        &self.project_key
    }

    pub(crate) fn api_token(&self) -> &str {
        &self.api_token
    }

    /// Joins an API path onto the server url, keeping any context path.
    pub(crate) fn endpoint(&self, path: &str) -> Url {
        let mut base = self.server_url.clone();
        if !base.path().ends_with('/') {
            let p = format!("{}/", base.path());
            base.set_path(&p);
        }
        base.join(path.trim_start_matches('/')).expect("static api path")
    }
}

/// Issue object as returned by `/api/issues/search`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawIssue {
    pub key: String,
    pub component: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub line: Option<u32>,
    pub message: String,
    #[serde(rename = "type")]
    pub issue_type: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Paging {
    #[serde(rename = "pageIndex", default)]
    pub page_index: usize,
    #[serde(rename = "pageSize", default)]
    pub page_size: usize,
    pub total: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SearchResponse {
    pub issues: Vec<RawIssue>,
    pub paging: Paging,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MapError {
    #[error("issue type `{0}` is not BUG, VULNERABILITY or CODE_SMELL")]
    UnknownType(String),
    #[error("component `{0}` does not name a file")]
    NotAFile(String),
    #[error(transparent)]
    Record(#[from] RecordError),
}

/// Translates a server payload into an [`IssueRecord`].
///
/// The `<project_key>:` prefix is stripped from the component key. Issues
/// without a line are kept as file-level findings on line 1.
pub fn map_issue(raw: &RawIssue, project_key: &str) -> Result<IssueRecord, MapError> {
    let issue_type: IssueType = raw
        .issue_type
        .parse()
        .map_err(|_| MapError::UnknownType(raw.issue_type.clone()))?;
    let prefix = format!("{project_key}:");
    let path = match raw.component.strip_prefix(&prefix) {
        Some(p) => p,
        // Component keys of other projects (or branches) are taken after the first colon.
        None => match raw.component.split_once(':') {
            Some((_, p)) => p,
            None => return Err(MapError::NotAFile(raw.component.clone())),
        },
    };
    if path.is_empty() {
        return Err(MapError::NotAFile(raw.component.clone()));
    }
    let (line, message) = match raw.line {
        Some(l) if l >= 1 => (l, raw.message.clone()),
        _ => (1, format!("{FILE_LEVEL_PREFIX}{}", raw.message)),
    };
    Ok(IssueRecord::new(path, line, message, issue_type)?)
}

#[derive(Debug, Error)]
pub enum FetchError {
    #[error("authentication rejected by analysis server (HTTP {0})")]
    AuthError(u16),
    #[error("project `{0}` not found")]
    ProjectNotFound(String),
    #[error("transport error: {0}")]
    TransportError(String),
    #[error("unexpected response: {0}")]
    SchemaError(String),
}

/// Result of a full extraction run.
#[derive(Debug, Clone, Default)]
pub struct Extraction {
    pub issues: Vec<IssueRecord>,
    /// Issues of types other than the three supported ones.
    pub skipped_unknown_type: usize,
    /// Issues that carried no line number.
    pub file_level: usize,
    pub pages_requested: usize,
}

impl Extraction {
    pub fn counts(&self) -> BTreeMap<IssueType, usize> {
        count_by_type(&self.issues)
    }
}

pub fn count_by_type(issues: &[IssueRecord]) -> BTreeMap<IssueType, usize> {
    let mut counts: BTreeMap<IssueType, usize> = IssueType::ALL.iter().map(|t| (*t, 0)).collect();
    for i in issues {
        *counts.entry(i.issue_type).or_default() += 1;
    }
    counts
}

pub struct SonarClient {
    http: reqwest::Client,
    config: ServerConfig,
}

impl SonarClient {
    pub fn new(config: ServerConfig) -> Result<Self, FetchError> {
        let http = reqwest::Client::builder()
            .timeout(Duration::from_secs(60))
            .build()
            .map_err(|e| FetchError::TransportError(e.to_string()))?;
        Ok(SonarClient { http, config })
    }

    pub fn config(&self) -> &ServerConfig {
        &self.config
    }

    async fn fetch_page(&self, page: usize, page_size: usize) -> Result<SearchResponse, FetchError> {
        let mut url = self.config.endpoint("api/issues/search");
        url.query_pairs_mut()
            .append_pair("componentKeys", self.config.project_key())
            .append_pair("resolved", "false")
            .append_pair("p", &page.to_string())
            .append_pair("ps", &page_size.to_string());
        let resp = self
            .http
            .get(url)
            .bearer_auth(self.config.api_token())
            .send()
            .await
            .map_err(|e| FetchError::TransportError(e.without_url().to_string()))?;
        let status = resp.status().as_u16();
        match status {
            401 | 403 => return Err(FetchError::AuthError(status)),
            404 => return Err(FetchError::ProjectNotFound(self.config.project_key().to_string())),
            s if !(200..300).contains(&s) => {
                return Err(FetchError::TransportError(format!("HTTP {s}")))
            }
            _ => {}
        }
        let body = resp
            .bytes()
            .await
            .map_err(|e| FetchError::TransportError(e.without_url().to_string()))?;
        serde_json::from_slice(&body).map_err(|e| FetchError::SchemaError(e.to_string()))
    }

    /// Pages through every open issue of the project.
    pub async fn fetch_issues(&self, page_size: usize) -> Result<Extraction, FetchError> {
        if page_size == 0 {
            return Err(FetchError::SchemaError("page size must be positive".into()));
        }
        let mut by_key: BTreeMap<String, RawIssue> = BTreeMap::new();
        let mut page = 1;
        let mut pages_requested = 0;
        loop {
            let resp = self.fetch_page(page, page_size).await?;
            pages_requested += 1;
            let got = resp.issues.len();
            for issue in resp.issues {
                by_key.entry(issue.key.clone()).or_insert(issue);
            }
            let seen = page * page_size;
            if got == 0 || seen >= resp.paging.total || seen >= MAX_RESULT_WINDOW {
                if resp.paging.total > MAX_RESULT_WINDOW {
                    tracing::warn!(
                        total = resp.paging.total,
                        "result window exceeded; only the first {MAX_RESULT_WINDOW} issues are reachable"
                    );
                }
                break;
            }
            page += 1;
        }

        let mut extraction = Extraction {
            pages_requested,
            ..Default::default()
        };
        for raw in by_key.values() {
            match map_issue(raw, self.config.project_key()) {
                Ok(record) => {
                    if raw.line.is_none() {
                        extraction.file_level += 1;
                    }
                    extraction.issues.push(record);
                }
                Err(MapError::UnknownType(t)) => {
                    tracing::warn!(key = %raw.key, issue_type = %t, "skipping unsupported issue type");
                    extraction.skipped_unknown_type += 1;
                }
                Err(e) => return Err(FetchError::SchemaError(format!("issue {}: {e}", raw.key))),
            }
        }
        sort_issues(&mut extraction.issues);
        Ok(extraction)
    }

    /// Waits until the server's compute-engine queue for this project is empty.
    pub async fn wait_for_analysis(&self, timeout: Duration) -> Result<(), FetchError> {
        let deadline = std::time::Instant::now() + timeout;
        loop {
            let mut url = self.config.endpoint("api/ce/component");
            url.query_pairs_mut()
                .append_pair("component", self.config.project_key());
            let resp = self
                .http
                .get(url)
                .bearer_auth(self.config.api_token())
                .send()
                .await
                .map_err(|e| FetchError::TransportError(e.without_url().to_string()))?;
            match resp.status().as_u16() {
                401 | 403 => return Err(FetchError::AuthError(resp.status().as_u16())),
                404 => return Err(FetchError::ProjectNotFound(self.config.project_key().into())),
                _ => {}
            }
            let body: serde_json::Value = resp
                .json()
                .await
                .map_err(|e| FetchError::SchemaError(e.to_string()))?;
            let queued = body
                .get("queue")
                .and_then(|q| q.as_array())
                .map(|q| !q.is_empty())
                .unwrap_or(false);
            if !queued {
                return Ok(());
            }
            if std::time::Instant::now() >= deadline {
                return Err(FetchError::TransportError("analysis did not finish in time".into()));
            }
            tokio::time::sleep(Duration::from_secs(2)).await;
        }
    }
}

/// Convenience wrapper over [`SonarClient::fetch_issues`].
pub async fn fetch_issues(config: ServerConfig, page_size: usize) -> Result<Extraction, FetchError> {
    SonarClient::new(config)?.fetch_issues(page_size).await
}

pub mod mock {
    //! In-process server implementing `/api/issues/search` for tests and demos.

    use std::net::SocketAddr;
    use std::sync::atomic::{AtomicUsize, Ordering};
    use std::sync::Arc;

    use axum::extract::{Query, State};
    use axum::http::{HeaderMap, StatusCode};
    use axum::response::{IntoResponse, Response};
    use axum::routing::get;
    use axum::{Json, Router};
    use serde::Deserialize;

    use super::{Paging, RawIssue, SearchResponse};

    /// Fixture-backed issue set for one project.
    #[derive(Debug, Clone, Deserialize, serde::Serialize)]
    pub struct MockProject {
        pub project_key: String,
        pub token: String,
        #[serde(default)]
        pub issues: Vec<RawIssue>,
    }

    struct Shared {
        project: MockProject,
        requests: AtomicUsize,
    }

    pub struct MockSonarServer {
        addr: SocketAddr,
        shared: Arc<Shared>,
        task: tokio::task::JoinHandle<()>,
    }

    #[derive(Deserialize)]
    struct SearchParams {
        #[serde(rename = "componentKeys")]
        component_keys: Option<String>,
        p: Option<usize>,
        ps: Option<usize>,
    }

    impl MockSonarServer {
        pub async fn start(project: MockProject) -> std::io::Result<Self> {
            Self::bind(project, "127.0.0.1:0".parse().unwrap()).await
        }

        pub async fn bind(project: MockProject, addr: SocketAddr) -> std::io::Result<Self> {
            let shared = Arc::new(Shared {
                project,
                requests: AtomicUsize::new(0),
            });
            let app = router(shared.clone());
            let listener = tokio::net::TcpListener::bind(addr).await?;
            let addr = listener.local_addr()?;
            let task = tokio::spawn(async move {
                let _ = axum::serve(listener, app).await;
            });
            Ok(MockSonarServer { addr, shared, task })
        }

        pub fn url(&self) -> String {
            format!("http://{}", self.addr)
        }

        pub fn addr(&self) -> SocketAddr {
            self.addr
        }

        /// Number of `/api/issues/search` requests served so far.
        pub fn search_requests(&self) -> usize {
            self.shared.requests.load(Ordering::SeqCst)
        }

        /// Serves until the task is cancelled.
        pub async fn join(mut self) {
            let task = std::mem::replace(&mut self.task, tokio::spawn(async {}));
            let _ = task.await;
        }
    }

    impl Drop for MockSonarServer {
        fn drop(&mut self) {
            self.task.abort();
        }
    }

    fn authorized(shared: &Shared, headers: &HeaderMap) -> bool {
        let expected = format!("Bearer {}", shared.project.token);
        headers
            .get(axum::http::header::AUTHORIZATION)
            .and_then(|v| v.to_str().ok())
            .map(|v| v == expected)
            .unwrap_or(false)
    }

    fn router(shared: Arc<Shared>) -> Router {
        Router::new()
            .route("/api/issues/search", get(search))
            .route("/api/ce/component", get(ce_component))
            .with_state(shared)
    }

    async fn search(
        State(shared): State<Arc<Shared>>,
        headers: HeaderMap,
        Query(params): Query<SearchParams>,
    ) -> Response {
        shared.requests.fetch_add(1, Ordering::SeqCst);
        if !authorized(&shared, &headers) {
            return StatusCode::UNAUTHORIZED.into_response();
        }
        if params.component_keys.as_deref() != Some(shared.project.project_key.as_str()) {
            return (StatusCode::NOT_FOUND, "component not found").into_response();
        }
        let page = params.p.unwrap_or(1).max(1);
        let size = params.ps.unwrap_or(100).clamp(1, 500);
        let all = &shared.project.issues;
        let start = (page - 1).saturating_mul(size).min(all.len());
        let end = (start + size).min(all.len());
        Json(SearchResponse {
            issues: all[start..end].to_vec(),
            paging: Paging {
                page_index: page,
                page_size: size,
                total: all.len(),
            },
        })
        .into_response()
    }

    async fn ce_component(State(shared): State<Arc<Shared>>, headers: HeaderMap) -> Response {
        if !authorized(&shared, &headers) {
            return StatusCode::UNAUTHORIZED.into_response();
        }
        Json(serde_json::json!({ "queue": [] })).into_response()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn raw(component: &str, line: Option<u32>, message: &str, ty: &str) -> RawIssue {
        RawIssue {
            key: format!("{component}-{line:?}-{message}"),
            component: component.into(),
            line,
            message: message.into(),
            issue_type: ty.into(),
        }
    }

    #[test]
    fn maps_sample_row() {
        let r = raw(
            "proj:client/src/App.jsx",
            Some(12),
            "A fragment with only one child is redundant.",
            "CODE_SMELL",
        );
        let rec = map_issue(&r, "proj").unwrap();
        assert_eq!(rec.file_location, "client/src/App.jsx");
        assert_eq!(rec.file_name, "App.jsx");
        assert_eq!(rec.line, 12);
        assert_eq!(rec.issue_type, IssueType::CodeSmell);
    }

    #[test]
    fn hotspot_is_unknown_type() {
        let r = raw("proj:a.py", Some(1), "m", "SECURITY_HOTSPOT");
        assert_eq!(
            map_issue(&r, "proj"),
            Err(MapError::UnknownType("SECURITY_HOTSPOT".into()))
        );
    }

    #[test]
    fn missing_line_becomes_file_level() {
        let r = raw("proj:deploy/Dockerfile", None, "Use a non-root user.", "VULNERABILITY");
        let rec = map_issue(&r, "proj").unwrap();
        assert_eq!(rec.line, 1);
        assert_eq!(rec.message, "[file-level] Use a non-root user.");
    }

    #[test]
    fn project_component_is_not_a_file() {
        let r = raw("proj", None, "m", "BUG");
        assert!(matches!(map_issue(&r, "proj"), Err(MapError::NotAFile(_))));
    }

    #[test]
    fn windows_component_paths_normalize() {
        let r = raw("proj:src\\main\\App.java", Some(3), "m", "BUG");
        assert_eq!(map_issue(&r, "proj").unwrap().file_location, "src/main/App.java");
    }

    #[test]
    fn config_validation() {
        assert!(ServerConfig::new("http://localhost:9000", "t", "k").is_ok());
        assert_eq!(
            ServerConfig::new("localhost:9000", "t", "k").unwrap_err(),
            ConfigError::BadUrl("localhost:9000".into())
        );
        assert_eq!(
            ServerConfig::new("ftp://x", "t", "k").unwrap_err(),
            ConfigError::BadUrl("ftp://x".into())
        );
        assert_eq!(
            ServerConfig::new("https://x", "t", " ").unwrap_err(),
            ConfigError::EmptyProjectKey
        );
    }

    #[test]
    fn debug_redacts_token() {
        let c = ServerConfig::new("http://h", "s3cret", "k").unwrap();
        assert!(!format!("{c:?}").contains("s3cret"));
    }

    #[test]
    fn endpoint_keeps_context_path() {
        let c = ServerConfig::new("http://h/sonar", "t", "k").unwrap();
        assert_eq!(c.endpoint("api/issues/search").as_str(), "http://h/sonar/api/issues/search");
    }
}
