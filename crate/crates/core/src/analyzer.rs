//! Static analysis back-ends used for rescans.

use std::path::{Path, PathBuf};
use std::process::Stdio;
use std::time::Duration;

use async_trait::async_trait;
use globset::{Glob, GlobMatcher};
use serde::Deserialize;
use thiserror::Error;
use walkdir::WalkDir;

use crate::issues::{sort_issues, IssueRecord, IssueType};
use crate::sonar::{FetchError, ServerConfig, SonarClient};

#[derive(Debug, Error)]
pub enum AnalyzerError {
    #[error("analyzer unavailable: {0}")]
    AnalyzerUnavailable(String),
    #[error("analysis failed: {0}")]
    Failed(String),
    #[error(transparent)]
    Fetch(#[from] FetchError),
    #[error("i/o error at {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("invalid analyzer fixture: {0}")]
    Fixture(String),
}

/// Something that can list the issues present in a project tree.
#[async_trait]
pub trait AnalysisProvider: Send + Sync {
    async fn analyze(&self, project_root: &Path) -> Result<Vec<IssueRecord>, AnalyzerError>;
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RuleSpec {
    #[serde(default = "any_path")]
    glob: String,
    contains: String,
    #[serde(rename = "type")]
    issue_type: IssueType,
    message: String,
}

fn any_path() -> String {
    "**".into()
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct FixtureFile {
    #[serde(default, rename = "rule")]
    rules: Vec<RuleSpec>,
}

#[derive(Debug, Clone)]
struct MarkerRule {
    glob: GlobMatcher,
    contains: String,
    issue_type: IssueType,
    message: String,
}

/// Line-pattern analyzer: every line containing a rule's `contains` text in a
/// file matching its `glob` yields one issue.
///
/// ```toml
/// [[rule]]
/// glob = "**/*.py"
/// contains = "@bug-easy"
/// type = "BUG"
/// message = "Easy bug marker"
/// ```
#[derive(Debug, Clone, Default)]
pub struct MockAnalyzer {
    rules: Vec<MarkerRule>,
}

impl MockAnalyzer {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn rule(mut self, glob: &str, contains: &str, issue_type: IssueType, message: &str) -> Self {
        self.rules.push(MarkerRule {
            glob: Glob::new(glob).expect("valid glob").compile_matcher(),
            contains: contains.into(),
            issue_type,
            message: message.into(),
        });
        self
    }

    pub fn from_toml(text: &str) -> Result<Self, AnalyzerError> {
        let file: FixtureFile = toml::from_str(text).map_err(|e| AnalyzerError::Fixture(e.to_string()))?;
        let mut rules = Vec::new();
        for (i, r) in file.rules.into_iter().enumerate() {
            if r.contains.is_empty() || r.message.is_empty() {
                return Err(AnalyzerError::Fixture(format!("rule {}: empty contains/message", i + 1)));
            }
            let glob = Glob::new(&r.glob)
                .map_err(|e| AnalyzerError::Fixture(format!("rule {}: {e}", i + 1)))?
                .compile_matcher();
            rules.push(MarkerRule {
                glob,
                contains: r.contains,
                issue_type: r.issue_type,
                message: r.message,
            });
        }
        Ok(MockAnalyzer { rules })
    }

    pub fn load(path: &Path) -> Result<Self, AnalyzerError> {
        let text = std::fs::read_to_string(path).map_err(|source| AnalyzerError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml(&text)
    }

    /// Synchronous scan; [`AnalysisProvider::analyze`] delegates here.
    pub fn scan(&self, root: &Path) -> Result<Vec<IssueRecord>, AnalyzerError> {
        if !root.is_dir() {
            return Err(AnalyzerError::Failed(format!("{} is not a directory", root.display())));
        }
        let mut out = Vec::new();
        for entry in WalkDir::new(root).sort_by_file_name() {
            let entry = entry.map_err(|e| AnalyzerError::Failed(e.to_string()))?;
            if !entry.file_type().is_file() {
                continue;
            }
            let rel = relative_location(root, entry.path());
            let applicable: Vec<&MarkerRule> = self.rules.iter().filter(|r| r.glob.is_match(&rel)).collect();
            if applicable.is_empty() {
                continue;
            }
            let bytes = std::fs::read(entry.path()).map_err(|source| AnalyzerError::Io {
                path: entry.path().display().to_string(),
                source,
            })?;
            let text = String::from_utf8_lossy(&bytes);
            for (n, line) in text.lines().enumerate() {
                for r in &applicable {
                    if line.contains(&r.contains) {
                        let rec = IssueRecord::new(&rel, n as u32 + 1, r.message.clone(), r.issue_type)
                            .map_err(|e| AnalyzerError::Failed(e.to_string()))?;
                        out.push(rec);
                    }
                }
            }
        }
        sort_issues(&mut out);
        Ok(out)
    }
}

pub(crate) fn relative_location(root: &Path, path: &Path) -> String {
    let rel = path.strip_prefix(root).unwrap_or(path);
    rel.components()
        .map(|c| c.as_os_str().to_string_lossy())
        .collect::<Vec<_>>()
        .join("/")
}

#[async_trait]
impl AnalysisProvider for MockAnalyzer {
    async fn analyze(&self, project_root: &Path) -> Result<Vec<IssueRecord>, AnalyzerError> {
        self.scan(project_root)
    }
}

/// Runs `sonar-scanner` on the tree, waits for the server to finish, then
/// fetches the issue list.
pub struct SonarAnalyzer {
    config: ServerConfig,
    scanner: PathBuf,
    wait: Duration,
    page_size: usize,
}

impl SonarAnalyzer {
    pub fn new(config: ServerConfig) -> Self {
        SonarAnalyzer {
            config,
            scanner: PathBuf::from("sonar-scanner"),
            wait: Duration::from_secs(600),
            page_size: 500,
        }
    }

    pub fn with_scanner(mut self, scanner: impl Into<PathBuf>) -> Self {
        self.scanner = scanner.into();
        self
    }

    pub fn with_wait(mut self, wait: Duration) -> Self {
        self.wait = wait;
        self
    }
}

#[async_trait]
impl AnalysisProvider for SonarAnalyzer {
    async fn analyze(&self, project_root: &Path) -> Result<Vec<IssueRecord>, AnalyzerError> {
        let status = tokio::process::Command::new(&self.scanner)
            .arg(format!("-Dsonar.projectKey={}", self.config.project_key()))
            .arg(format!("-Dsonar.host.url={}", self.config.server_url()))
            .arg(format!("-Dsonar.projectBaseDir={}", project_root.display()))
            .env("SONAR_TOKEN", self.config.api_token())
            .stdin(Stdio::null())
            .stdout(Stdio::null())
            .status()
            .await;
        match status {
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                return Err(AnalyzerError::AnalyzerUnavailable(format!(
                    "`{}` not found on PATH",
                    self.scanner.display()
                )))
            }
            Err(e) => return Err(AnalyzerError::AnalyzerUnavailable(e.to_string())),
            Ok(s) if !s.success() => return Err(AnalyzerError::Failed(format!("scanner exited with {s}"))),
            Ok(_) => {}
        }
        let client = SonarClient::new(self.config.clone())?;
        client.wait_for_analysis(self.wait).await?;
        Ok(client.fetch_issues(self.page_size).await?.issues)
    }
}
