//! Whole-project and single-file revision, output tree layout, and the
//! cheap-then-advanced hybrid pipeline.

use std::collections::BTreeMap;
use std::path::{Component, Path, PathBuf};
use std::sync::Arc;

use futures::stream::{self, StreamExt};
use rust_decimal::Decimal;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use walkdir::WalkDir;

use crate::analyzer::{AnalysisProvider, AnalyzerError};
use crate::gateway::{extract_code, Gateway, GatewayError, TokenUsage};
use crate::issues::{sort_issues, IssueRecord, IssueType};
use crate::prompt::{Mode, PromptBuilder, PromptError};
use crate::report::{CostLedger, Strategy};

pub const REVISED_SUFFIX: &str = ".Revised";
pub const REVISED_PREFIX: &str = "Revised.";
pub const DEFAULT_WORKERS: usize = 4;

#[derive(Debug, Error, PartialEq, Eq)]
#[error("name must not be empty")]
pub struct EmptyName;

/// `Project` → `Project.Revised`.
pub fn revised_root_name(root: &str) -> Result<String, EmptyName> {
    if root.is_empty() {
        return Err(EmptyName);
    }
    Ok(format!("{root}{REVISED_SUFFIX}"))
}

/// `App.jsx` → `Revised.App.jsx`. No deduplication of an existing prefix.
pub fn revised_file_name(name: &str) -> Result<String, EmptyName> {
    if name.is_empty() {
        return Err(EmptyName);
    }
    Ok(format!("{REVISED_PREFIX}{name}"))
}

/// Sibling output directory for a project root.
pub fn revised_root_path(project_root: &Path) -> Result<PathBuf, OrchestratorError> {
    let abs;
    let root = if project_root.file_name().is_none() {
        abs = std::fs::canonicalize(project_root).map_err(|e| io_err(project_root, e))?;
        abs.as_path()
    } else {
        project_root
    };
    let name = root
        .file_name()
        .and_then(|n| n.to_str())
        .ok_or_else(|| OrchestratorError::InvalidRoot(project_root.display().to_string()))?;
    let revised = revised_root_name(name).map_err(|_| OrchestratorError::InvalidRoot(name.into()))?;
    Ok(root.with_file_name(revised))
}

/// Relative output location for an issue path: `a/b/c.py` → `a/b/Revised.c.py`.
pub fn revised_relative_path(file_location: &str) -> Result<String, EmptyName> {
    let (dir, name) = match file_location.rsplit_once('/') {
        Some((d, n)) => (Some(d), n),
        None => (None, file_location),
    };
    let name = revised_file_name(name)?;
    Ok(match dir {
        Some(d) => format!("{d}/{name}"),
        None => name,
    })
}

/// Path of the run manifest written beside an output tree.
pub fn manifest_path(output_root: &Path) -> PathBuf {
    sibling_with_suffix(output_root, ".manifest.json")
}

/// Path of the cost ledger written beside an output tree.
pub fn ledger_path(output_root: &Path) -> PathBuf {
    sibling_with_suffix(output_root, ".ledger.csv")
}

fn sibling_with_suffix(p: &Path, suffix: &str) -> PathBuf {
    let mut s = p.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RevisionStatus {
    Revised,
    Unchanged,
    Failed,
}

/// Why a revision failed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureKind {
    Auth,
    RateLimited,
    Provider,
    PromptTooLarge,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RevisionResult {
    pub file_location: String,
    pub model_id: String,
    /// Empty when `status` is `Failed`.
    #[serde(skip)]
    pub revised_content: String,
    pub usage: TokenUsage,
    pub cost: Decimal,
    pub status: RevisionStatus,
    pub issues_targeted: Vec<IssueRecord>,
    pub attempts: u32,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub failure: Option<FailureKind>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub diagnostic: Option<String>,
    #[serde(skip)]
    pub latency_ms: u64,
}

#[derive(Debug, Error)]
pub enum OrchestratorError {
    #[error("file `{0}` does not exist under the project root")]
    MissingFile(String),
    #[error("file location `{0}` escapes the project root")]
    OutsideRoot(String),
    #[error("invalid project root `{0}`")]
    InvalidRoot(String),
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error("model `{0}` is not registered")]
    UnknownModel(String),
    #[error(transparent)]
    Analyzer(#[from] AnalyzerError),
    #[error("i/o error at {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

fn io_err(path: &Path, source: std::io::Error) -> OrchestratorError {
    OrchestratorError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Resolves a forward-slash location under `root`, refusing `..` and absolute paths.
pub fn resolve_under(root: &Path, file_location: &str) -> Result<PathBuf, OrchestratorError> {
    let rel = Path::new(file_location);
    if rel
        .components()
        .any(|c| !matches!(c, Component::Normal(_) | Component::CurDir))
    {
        return Err(OrchestratorError::OutsideRoot(file_location.to_string()));
    }
    Ok(root.join(rel))
}

/// A file referenced by issues that could not be revised at all.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MissingFile {
    pub file_location: String,
    pub issues: usize,
    pub reason: String,
}

/// Outcome of one `revise_all` pass.
#[derive(Debug, Clone, Default)]
pub struct RunOutput {
    pub model_id: String,
    /// Sorted by file location.
    pub results: Vec<RevisionResult>,
    pub missing: Vec<MissingFile>,
    /// Output paths relative to the output root, sorted.
    pub written: Vec<String>,
}

impl RunOutput {
    pub fn count(&self, status: RevisionStatus) -> usize {
        self.results.iter().filter(|r| r.status == status).count()
    }

    pub fn total_cost(&self) -> Decimal {
        self.results.iter().map(|r| r.cost).sum()
    }

    pub fn any_failed(&self) -> bool {
        self.count(RevisionStatus::Failed) > 0
    }

    pub fn auth_failed(&self) -> bool {
        self.results.iter().any(|r| r.failure == Some(FailureKind::Auth))
    }
}

/// Groups issues per file, each group sorted by line.
pub fn group_by_file(issues: &[IssueRecord]) -> BTreeMap<String, Vec<IssueRecord>> {
    let mut groups: BTreeMap<String, Vec<IssueRecord>> = BTreeMap::new();
    for i in issues {
        groups.entry(i.file_location.clone()).or_default().push(i.clone());
    }
    for g in groups.values_mut() {
        sort_issues(g);
    }
    groups
}

pub struct Orchestrator {
    gateway: Arc<Gateway>,
    builder: Arc<PromptBuilder>,
    workers: usize,
}

impl Orchestrator {
    pub fn new(gateway: Arc<Gateway>, builder: PromptBuilder) -> Self {
        Orchestrator {
            gateway,
            builder: Arc::new(builder),
            workers: DEFAULT_WORKERS,
        }
    }

    pub fn with_workers(mut self, workers: usize) -> Self {
        self.workers = workers.max(1);
        self
    }

    pub fn gateway(&self) -> &Gateway {
        &self.gateway
    }

    pub fn builder(&self) -> &PromptBuilder {
        &self.builder
    }

    /// Revises in-memory content. Provider failures become `Failed` results;
    /// prompt problems and unknown models are errors.
    pub async fn revise_content(
        &self,
        original: &str,
        issues: &[IssueRecord],
        model_id: &str,
        mode: Mode,
        override_text: Option<&str>,
    ) -> Result<RevisionResult, OrchestratorError> {
        if !self.gateway.has_model(model_id) {
            return Err(OrchestratorError::UnknownModel(model_id.to_string()));
        }
        let prompt = self.builder.build(original, issues, mode, override_text)?;
        let file_location = prompt.target.file_location.clone();
        let mut result = RevisionResult {
            file_location,
            model_id: model_id.to_string(),
            revised_content: String::new(),
            usage: TokenUsage::default(),
            cost: Decimal::ZERO,
            status: RevisionStatus::Failed,
            issues_targeted: issues.to_vec(),
            attempts: 0,
            failure: None,
            diagnostic: None,
            latency_ms: 0,
        };
        match self.gateway.complete(&prompt, model_id).await {
            Ok(done) => {
                let mut code = extract_code(&done.text);
                // Follow the original's final-newline convention.
                if !original.ends_with('\n') && code.ends_with('\n') {
                    code.pop();
                }
                result.status = if code == original {
                    RevisionStatus::Unchanged
                } else {
                    RevisionStatus::Revised
                };
                result.cost = self.gateway.cost(model_id, done.usage);
                result.usage = done.usage;
                result.attempts = done.attempts;
                result.latency_ms = done.latency_ms;
                result.revised_content = code;
            }
            Err(e) => {
                let (kind, attempts) = match &e {
                    GatewayError::ProviderAuthError(_) => (FailureKind::Auth, 1),
                    GatewayError::RateLimited { attempts, .. } => (FailureKind::RateLimited, *attempts),
                    GatewayError::ProviderError { attempts, .. } => (FailureKind::Provider, *attempts),
                    GatewayError::UnknownModel(m) => return Err(OrchestratorError::UnknownModel(m.clone())),
                };
                result.failure = Some(kind);
                result.attempts = attempts;
                result.diagnostic = Some(e.to_string());
            }
        }
        Ok(result)
    }

    /// Reads `file_location` under `root` and revises it. Writes nothing.
    pub async fn revise_file(
        &self,
        root: &Path,
        file_location: &str,
        issues: &[IssueRecord],
        model_id: &str,
        mode: Mode,
        override_text: Option<&str>,
    ) -> Result<RevisionResult, OrchestratorError> {
        let path = resolve_under(root, file_location)?;
        if !path.is_file() {
            return Err(OrchestratorError::MissingFile(file_location.to_string()));
        }
        let bytes = tokio::fs::read(&path).await.map_err(|e| io_err(&path, e))?;
        let original = String::from_utf8_lossy(&bytes);
        self.revise_content(&original, issues, model_id, mode, override_text).await
    }

    /// Revises every file named by `issues` (batch mode) and writes
    /// `Revised`/`Unchanged` results into `output_root`.
    pub async fn revise_all(
        &self,
        issues: &[IssueRecord],
        source_root: &Path,
        output_root: &Path,
        model_id: &str,
    ) -> Result<RunOutput, OrchestratorError> {
        if !self.gateway.has_model(model_id) {
            return Err(OrchestratorError::UnknownModel(model_id.to_string()));
        }
        let groups = group_by_file(issues);
        let outcomes: Vec<(String, usize, Result<RevisionResult, OrchestratorError>)> =
            stream::iter(groups.into_iter().map(|(loc, group)| async move {
                let n = group.len();
                let r = self
                    .revise_file(source_root, &loc, &group, model_id, Mode::Batch, None)
                    .await;
                (loc, n, r)
            }))
            .buffer_unordered(self.workers)
            .collect()
            .await;

        let mut out = RunOutput {
            model_id: model_id.to_string(),
            ..Default::default()
        };
        for (loc, n, r) in outcomes {
            match r {
                Ok(res) => out.results.push(res),
                Err(e @ (OrchestratorError::MissingFile(_) | OrchestratorError::OutsideRoot(_))) => {
                    tracing::warn!(file = %loc, "{e}");
                    out.missing.push(MissingFile {
                        file_location: loc,
                        issues: n,
                        reason: e.to_string(),
                    });
                }
                Err(OrchestratorError::Prompt(e)) => {
                    let targeted = issues.iter().filter(|i| i.file_location == loc).cloned().collect();
                    out.results.push(RevisionResult {
                        file_location: loc,
                        model_id: model_id.to_string(),
                        revised_content: String::new(),
                        usage: TokenUsage::default(),
                        cost: Decimal::ZERO,
                        status: RevisionStatus::Failed,
                        issues_targeted: targeted,
                        attempts: 0,
                        failure: Some(FailureKind::PromptTooLarge),
                        diagnostic: Some(e.to_string()),
                        latency_ms: 0,
                    });
                }
                Err(e) => return Err(e),
            }
        }
        out.results.sort_by(|a, b| a.file_location.cmp(&b.file_location));
        out.missing.sort_by(|a, b| a.file_location.cmp(&b.file_location));

        for r in &out.results {
            if r.status == RevisionStatus::Failed {
                continue;
            }
            let rel = revised_relative_path(&r.file_location).expect("non-empty location");
            let dest = output_root.join(&rel);
            if let Some(parent) = dest.parent() {
                std::fs::create_dir_all(parent).map_err(|e| io_err(parent, e))?;
            }
            std::fs::write(&dest, &r.revised_content).map_err(|e| io_err(&dest, e))?;
            out.written.push(rel);
        }
        out.written.sort();
        Ok(out)
    }

    /// Cheap model over everything, rescan, advanced model over what is left,
    /// final rescan. Both stages write into `output_root`; stage two
    /// overwrites stage-one files it revisits.
    pub async fn hybrid_pipeline(
        &self,
        issues: &[IssueRecord],
        project_root: &Path,
        output_root: &Path,
        cheap_model: &str,
        advanced_model: &str,
        analyzer: &dyn AnalysisProvider,
    ) -> Result<HybridOutcome, OrchestratorError> {
        for m in [cheap_model, advanced_model] {
            if !self.gateway.has_model(m) {
                return Err(OrchestratorError::UnknownModel(m.to_string()));
            }
        }
        let stage1 = self.revise_all(issues, project_root, output_root, cheap_model).await?;
        let missing: Vec<&str> = stage1.missing.iter().map(|m| m.file_location.as_str()).collect();
        let baseline: Vec<IssueRecord> = issues
            .iter()
            .filter(|i| !missing.contains(&i.file_location.as_str()))
            .cloned()
            .collect();

        let staging = tempfile::tempdir().map_err(|e| io_err(Path::new("<tempdir>"), e))?;
        let overlay = staging.path().join("tree");
        build_overlay(project_root, &stage1, &overlay)?;
        let rescan = analyzer.analyze(&overlay).await?;

        let (resolved1, remaining) = match_resolved(&baseline, &rescan);
        let targets = current_records(&remaining, &rescan);
        let stage2 = self.revise_all(&targets, &overlay, output_root, advanced_model).await?;

        let final_scan = if stage2.results.is_empty() {
            rescan.clone()
        } else {
            build_overlay(project_root, &stage2, &overlay)?;
            analyzer.analyze(&overlay).await?
        };
        let (resolved2, unresolved) = match_resolved(&remaining, &final_scan);

        let mut per_type: BTreeMap<IssueType, TypeOutcome> = BTreeMap::new();
        for ty in IssueType::ALL {
            let count = |v: &[IssueRecord]| v.iter().filter(|i| i.issue_type == ty).count() as u64;
            let t = TypeOutcome {
                total: count(&baseline),
                resolved_stage1: count(&resolved1),
                resolved_stage2: count(&resolved2),
                unresolved: count(&unresolved),
            };
            if t.total > 0 {
                per_type.insert(ty, t);
            }
        }

        let mut ledger = CostLedger::with_models(cheap_model, advanced_model);
        let cost1 = cost_by_type(&stage1.results);
        let cost2 = cost_by_type(&stage2.results);
        for (ty, t) in &per_type {
            ledger.record(
                *ty,
                Strategy::CheapOnly,
                t.total,
                t.resolved_stage1,
                cost1.get(ty).copied().unwrap_or_default(),
            );
            ledger.record(
                *ty,
                Strategy::AdvancedOnRemaining,
                t.total - t.resolved_stage1,
                t.resolved_stage2,
                cost2.get(ty).copied().unwrap_or_default(),
            );
        }
        ledger.derive_hybrid();

        Ok(HybridOutcome {
            stage1,
            rescan,
            stage2,
            final_rescan: final_scan,
            per_type,
            ledger,
        })
    }
}

/// Rescans the originals overlaid with `run`'s revised files and splits
/// `issues` into (resolved, still present).
pub async fn rescan_resolution(
    issues: &[IssueRecord],
    project_root: &Path,
    run: &RunOutput,
    analyzer: &dyn AnalysisProvider,
) -> Result<(Vec<IssueRecord>, Vec<IssueRecord>), OrchestratorError> {
    let staging = tempfile::tempdir().map_err(|e| io_err(Path::new("<tempdir>"), e))?;
    let overlay = staging.path().join("tree");
    build_overlay(project_root, run, &overlay)?;
    let rescan = analyzer.analyze(&overlay).await?;
    Ok(match_resolved(issues, &rescan))
}

/// Per-type resolution counts of a hybrid run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TypeOutcome {
    pub total: u64,
    pub resolved_stage1: u64,
    pub resolved_stage2: u64,
    pub unresolved: u64,
}

#[derive(Debug, Clone)]
pub struct HybridOutcome {
    pub stage1: RunOutput,
    pub rescan: Vec<IssueRecord>,
    pub stage2: RunOutput,
    pub final_rescan: Vec<IssueRecord>,
    pub per_type: BTreeMap<IssueType, TypeOutcome>,
    pub ledger: CostLedger,
}

/// Copies `project_root` to `dest` (once) and lays the run's revised
/// contents over it at their original locations.
fn build_overlay(project_root: &Path, run: &RunOutput, dest: &Path) -> Result<(), OrchestratorError> {
    if !dest.exists() {
        for entry in WalkDir::new(project_root).sort_by_file_name() {
            let entry = entry.map_err(|e| OrchestratorError::Io {
                path: project_root.display().to_string(),
                source: e.into(),
            })?;
            let rel = entry.path().strip_prefix(project_root).expect("walk stays under root");
            let target = dest.join(rel);
            if entry.file_type().is_dir() {
                std::fs::create_dir_all(&target).map_err(|e| io_err(&target, e))?;
            } else if entry.file_type().is_file() {
                std::fs::copy(entry.path(), &target).map_err(|e| io_err(&target, e))?;
            }
        }
    }
    for r in &run.results {
        if r.status == RevisionStatus::Revised {
            let target = resolve_under(dest, &r.file_location)?;
            std::fs::write(&target, &r.revised_content).map_err(|e| io_err(&target, e))?;
        }
    }
    Ok(())
}

type IssueKey = (String, String);

fn key(i: &IssueRecord) -> IssueKey {
    (i.file_location.clone(), i.message.clone())
}

/// Splits `before` into (resolved, still present) by multiset matching on
/// file and message against `after`. Line numbers are ignored.
pub fn match_resolved(before: &[IssueRecord], after: &[IssueRecord]) -> (Vec<IssueRecord>, Vec<IssueRecord>) {
    let mut counts: BTreeMap<IssueKey, usize> = BTreeMap::new();
    for i in after {
        *counts.entry(key(i)).or_default() += 1;
    }
    let mut sorted = before.to_vec();
    sort_issues(&mut sorted);
    let (mut resolved, mut present) = (Vec::new(), Vec::new());
    for i in sorted {
        match counts.get_mut(&key(&i)) {
            Some(n) if *n > 0 => {
                *n -= 1;
                present.push(i);
            }
            _ => resolved.push(i),
        }
    }
    (resolved, present)
}

/// For each still-present original, the rescan record carrying its current line.
fn current_records(present: &[IssueRecord], rescan: &[IssueRecord]) -> Vec<IssueRecord> {
    let mut pool: BTreeMap<IssueKey, Vec<&IssueRecord>> = BTreeMap::new();
    for r in rescan {
        pool.entry(key(r)).or_default().push(r);
    }
    for v in pool.values_mut() {
        v.reverse();
    }
    let mut out = Vec::with_capacity(present.len());
    for p in present {
        if let Some(r) = pool.get_mut(&key(p)).and_then(|v| v.pop()) {
            let mut rec = r.clone();
            rec.issue_type = p.issue_type;
            out.push(rec);
        }
    }
    sort_issues(&mut out);
    out
}

/// Splits each result's cost across the types of the issues it targeted,
/// proportionally to issue counts, at four decimal places. The last type
/// takes the rounding remainder so shares sum exactly.
pub fn cost_by_type(results: &[RevisionResult]) -> BTreeMap<IssueType, Decimal> {
    let mut out: BTreeMap<IssueType, Decimal> = BTreeMap::new();
    for r in results {
        let mut counts: BTreeMap<IssueType, u64> = BTreeMap::new();
        for i in &r.issues_targeted {
            *counts.entry(i.issue_type).or_default() += 1;
        }
        let n: u64 = counts.values().sum();
        if n == 0 {
            continue;
        }
        let mut left = r.cost;
        let last = counts.len() - 1;
        for (idx, (ty, c)) in counts.into_iter().enumerate() {
            let share = if idx == last {
                left
            } else {
                (r.cost * Decimal::from(c) / Decimal::from(n)).round_dp_with_strategy(4, rust_decimal::RoundingStrategy::ToZero)
            };
            left -= share;
            *out.entry(ty).or_default() += share;
        }
    }
    out
}

/// Deterministic run record written beside the output tree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub project: String,
    pub output_root: String,
    pub stages: Vec<StageManifest>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageManifest {
    pub stage: String,
    pub model_id: String,
    pub results: Vec<ManifestEntry>,
    pub missing: Vec<MissingFile>,
    pub total_cost: Decimal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub file_location: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output: Option<String>,
    pub status: RevisionStatus,
    pub usage: TokenUsage,
    pub cost: Decimal,
    pub issues: usize,
    pub attempts: u32,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub failure: Option<FailureKind>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub diagnostic: Option<String>,
}

impl StageManifest {
    pub fn from_run(stage: &str, run: &RunOutput) -> Self {
        StageManifest {
            stage: stage.to_string(),
            model_id: run.model_id.clone(),
            results: run
                .results
                .iter()
                .map(|r| ManifestEntry {
                    file_location: r.file_location.clone(),
                    output: (r.status != RevisionStatus::Failed)
                        .then(|| revised_relative_path(&r.file_location).expect("non-empty")),
                    status: r.status,
                    usage: r.usage,
                    cost: r.cost,
                    issues: r.issues_targeted.len(),
                    attempts: r.attempts,
                    failure: r.failure,
                    diagnostic: r.diagnostic.clone(),
                })
                .collect(),
            missing: run.missing.clone(),
            total_cost: run.total_cost(),
        }
    }
}

impl Manifest {
    pub fn new(project_root: &Path, output_root: &Path) -> Self {
        let name = |p: &Path| {
            p.file_name()
                .map(|n| n.to_string_lossy().into_owned())
                .unwrap_or_default()
        };
        Manifest {
            project: name(project_root),
            output_root: name(output_root),
            stages: Vec::new(),
        }
    }

    pub fn push(&mut self, stage: &str, run: &RunOutput) {
        self.stages.push(StageManifest::from_run(stage, run));
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("manifest serializes");
        s.push('\n');
        s
    }

    pub fn write(&self, path: &Path) -> Result<(), OrchestratorError> {
        std::fs::write(path, self.to_json()).map_err(|e| io_err(path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analyzer::MockAnalyzer;
    use crate::gateway::mock::{MockProvider, MockRule, RuleAction};
    use crate::gateway::{ModelPricing, PricingTable};
    use crate::gateway::{ProviderLimits, RetryPolicy};
    use crate::issues::sample_records;
    use crate::report::Strategy;
    use proptest::prelude::{prop, prop_assert_eq, proptest, ProptestConfig};
    use std::str::FromStr;

    #[test]
    fn naming() {
        assert_eq!(revised_root_name("Project").unwrap(), "Project.Revised");
        assert_eq!(revised_root_name("a.b").unwrap(), "a.b.Revised");
        assert_eq!(revised_root_name(""), Err(EmptyName));
        assert_eq!(revised_file_name("App.jsx").unwrap(), "Revised.App.jsx");
        assert_eq!(revised_file_name("deployment.yaml").unwrap(), "Revised.deployment.yaml");
        assert_eq!(revised_file_name("Revised.App.jsx").unwrap(), "Revised.Revised.App.jsx");
        assert_eq!(revised_file_name(""), Err(EmptyName));
        assert_eq!(
            revised_relative_path("client/src/App.jsx").unwrap(),
            "client/src/Revised.App.jsx"
        );
        assert_eq!(revised_relative_path("x.py").unwrap(), "Revised.x.py");
        assert_eq!(
            revised_root_path(Path::new("/tmp/w/Project")).unwrap(),
            PathBuf::from("/tmp/w/Project.Revised")
        );
        assert_eq!(
            manifest_path(Path::new("/tmp/w/Project.Revised")),
            PathBuf::from("/tmp/w/Project.Revised.manifest.json")
        );
    }

    #[test]
    fn resolve_refuses_escape() {
        assert!(resolve_under(Path::new("/r"), "../etc/passwd").is_err());
        assert!(resolve_under(Path::new("/r"), "/etc/passwd").is_err());
        assert_eq!(resolve_under(Path::new("/r"), "a/b").unwrap(), PathBuf::from("/r/a/b"));
    }

    fn gateway_with(provider: MockProvider) -> Arc<Gateway> {
        let mut pricing = PricingTable::default();
        pricing.insert(ModelPricing::new("cheap", Decimal::from_str("0.5").unwrap(), Decimal::from_str("1.5").unwrap()).unwrap());
        pricing.insert(ModelPricing::new("adv", Decimal::from_str("5").unwrap(), Decimal::from_str("15").unwrap()).unwrap());
        let mut gw = Gateway::new(pricing).with_retry(RetryPolicy::immediate());
        gw.register_provider("mock", Arc::new(provider), ProviderLimits::default());
        gw.register_model("cheap", "mock").unwrap();
        gw.register_model("adv", "mock").unwrap();
        Arc::new(gw)
    }

    fn sample_project() -> tempfile::TempDir {
        let dir = tempfile::tempdir().unwrap();
        let root = dir.path().join("Project");
        let files = [
            ("client/src/App.jsx", "export default function App() {\n  return <><Main /></>;\n}\n"),
            ("client/src/components/OfflineControl.jsx", "const x = y;\n"),
            ("deploy/helm/dis/deployment.yaml", "spec:\n  containers: []\n"),
            ("README.md", "no issues here\n"),
        ];
        for (p, c) in files {
            let full = root.join(p);
            std::fs::create_dir_all(full.parent().unwrap()).unwrap();
            std::fs::write(full, c).unwrap();
        }
        dir
    }

    #[tokio::test]
    async fn revise_all_writes_sample_tree() {
        let dir = sample_project();
        let root = dir.path().join("Project");
        let provider = MockProvider::new(vec![MockRule::new(
            "**",
            "",
            RuleAction::Rewrite(vec![(";".into(), "; // fixed".into()), ("[]".into(), "[] # fixed".into())]),
        )]);
        let orch = Orchestrator::new(gateway_with(provider), PromptBuilder::default());
        let out_root = revised_root_path(&root).unwrap();
        let out = orch.revise_all(&sample_records(), &root, &out_root, "cheap").await.unwrap();
        assert_eq!(
            out.written,
            vec![
                "client/src/Revised.App.jsx",
                "client/src/components/Revised.OfflineControl.jsx",
                "deploy/helm/dis/Revised.deployment.yaml",
            ]
        );
        assert!(dir.path().join("Project.Revised/client/src/Revised.App.jsx").is_file());
        assert!(!dir.path().join("Project.Revised/Revised.README.md").exists());
        assert_eq!(out.count(RevisionStatus::Revised), 3);
        for r in &out.results {
            assert_eq!(r.cost, orch.gateway().cost("cheap", r.usage));
        }
        // originals untouched
        assert_eq!(
            std::fs::read_to_string(root.join("client/src/components/OfflineControl.jsx")).unwrap(),
            "const x = y;\n"
        );
    }

    #[tokio::test]
    async fn refuse_is_unchanged_and_failure_is_excluded() {
        let dir = sample_project();
        let root = dir.path().join("Project");
        let provider = MockProvider::new(vec![
            MockRule::new("**/App.jsx", "", RuleAction::Refuse),
            MockRule::new("**/deployment.yaml", "", RuleAction::Fail),
            MockRule::new("**", "", RuleAction::Replace("fixed\n".into())),
        ]);
        let orch = Orchestrator::new(gateway_with(provider), PromptBuilder::default());
        let out_root = dir.path().join("out");
        let out = orch.revise_all(&sample_records(), &root, &out_root, "cheap").await.unwrap();
        let status: Vec<RevisionStatus> = out.results.iter().map(|r| r.status).collect();
        assert_eq!(
            status,
            vec![RevisionStatus::Unchanged, RevisionStatus::Revised, RevisionStatus::Failed]
        );
        let failed = &out.results[2];
        assert!(failed.revised_content.is_empty());
        assert_eq!(failed.cost, Decimal::ZERO);
        assert_eq!(failed.failure, Some(FailureKind::Provider));
        assert!(!out_root.join("deploy").exists());
        assert!(out.any_failed());
    }

    #[tokio::test]
    async fn missing_file_recorded_and_run_continues() {
        let dir = sample_project();
        let root = dir.path().join("Project");
        std::fs::remove_file(root.join("client/src/App.jsx")).unwrap();
        let provider = MockProvider::new(vec![MockRule::new("**", "", RuleAction::Replace("ok\n".into()))]);
        let orch = Orchestrator::new(gateway_with(provider), PromptBuilder::default());
        let out = orch
            .revise_all(&sample_records(), &root, &dir.path().join("out"), "cheap")
            .await
            .unwrap();
        assert_eq!(out.missing.len(), 1);
        assert_eq!(out.missing[0].file_location, "client/src/App.jsx");
        assert_eq!(out.results.len(), 2);
    }

    #[tokio::test]
    async fn empty_csv_creates_no_tree() {
        let dir = sample_project();
        let orch = Orchestrator::new(gateway_with(MockProvider::new(vec![])), PromptBuilder::default());
        let out_root = dir.path().join("out");
        let out = orch.revise_all(&[], &dir.path().join("Project"), &out_root, "cheap").await.unwrap();
        assert!(out.results.is_empty());
        assert!(!out_root.exists());
    }

    #[tokio::test]
    async fn unknown_model_is_error() {
        let dir = sample_project();
        let orch = Orchestrator::new(gateway_with(MockProvider::new(vec![])), PromptBuilder::default());
        let r = orch
            .revise_all(&sample_records(), &dir.path().join("Project"), &dir.path().join("o"), "nope")
            .await;
        assert!(matches!(r, Err(OrchestratorError::UnknownModel(_))));
    }

    #[tokio::test]
    async fn prompt_too_large_propagates_from_revise_file() {
        let dir = sample_project();
        let orch = Orchestrator::new(
            gateway_with(MockProvider::new(vec![])),
            PromptBuilder::default().with_budget(10),
        );
        let issues = &sample_records()[..1];
        let r = orch
            .revise_file(&dir.path().join("Project"), &issues[0].file_location, issues, "cheap", Mode::Batch, None)
            .await;
        assert!(matches!(r, Err(OrchestratorError::Prompt(PromptError::PromptTooLarge { .. }))));
    }

    #[test]
    fn multiset_matching_ignores_lines() {
        let r = |p: &str, l, m: &str| IssueRecord::new(p, l, m, IssueType::Bug).unwrap();
        let before = vec![r("a", 1, "m"), r("a", 5, "m"), r("b", 2, "m")];
        let after = vec![r("a", 9, "m")];
        let (resolved, present) = match_resolved(&before, &after);
        assert_eq!(resolved.len(), 2);
        assert_eq!(present, vec![r("a", 1, "m")]);
        let cur = current_records(&present, &after);
        assert_eq!(cur, vec![r("a", 9, "m")]);
    }

    #[test]
    fn cost_split_sums_exactly() {
        let r = |ty| IssueRecord::new("a", 1, "m", ty).unwrap();
        let res = RevisionResult {
            file_location: "a".into(),
            model_id: "m".into(),
            revised_content: String::new(),
            usage: TokenUsage::default(),
            cost: Decimal::from_str("0.0001").unwrap(),
            status: RevisionStatus::Revised,
            issues_targeted: vec![r(IssueType::Bug), r(IssueType::CodeSmell), r(IssueType::Vulnerability)],
            attempts: 1,
            failure: None,
            diagnostic: None,
            latency_ms: 0,
        };
        let split = cost_by_type(std::slice::from_ref(&res));
        assert_eq!(split.values().copied().sum::<Decimal>(), res.cost);
        assert_eq!(split[&IssueType::CodeSmell], Decimal::from_str("0.0001").unwrap());
    }

    fn marker_project(dir: &Path, bugs_easy: usize, bugs_hard: usize, vulns_easy: usize) -> PathBuf {
        let root = dir.join("Proj");
        std::fs::create_dir_all(root.join("src")).unwrap();
        let mut a = String::new();
        for _ in 0..bugs_easy {
            a.push_str("x()  # @bug-easy\n");
        }
        for _ in 0..bugs_hard {
            a.push_str("y()  # @bug-hard\n");
        }
        std::fs::write(root.join("src/a.py"), a).unwrap();
        let mut b = String::new();
        for _ in 0..vulns_easy {
            b.push_str("eval(z)  # @vuln-easy\n");
        }
        std::fs::write(root.join("src/b.py"), b).unwrap();
        std::fs::write(root.join("src/clean.py"), "pass\n").unwrap();
        root
    }

    fn marker_analyzer() -> MockAnalyzer {
        MockAnalyzer::new()
            .rule("**", "@bug-easy", IssueType::Bug, "easy bug")
            .rule("**", "@bug-hard", IssueType::Bug, "hard bug")
            .rule("**", "@vuln-easy", IssueType::Vulnerability, "easy vuln")
    }

    fn tiered_provider() -> MockProvider {
        MockProvider::new(vec![
            MockRule::new("**", "", RuleAction::Rewrite(vec![("@bug-easy".into(), "@ok".into()), ("@vuln-easy".into(), "@ok".into())]))
                .for_tier("cheap"),
            MockRule::new("**", "", RuleAction::Rewrite(vec![
                ("@bug-easy".into(), "@ok".into()),
                ("@bug-hard".into(), "@ok".into()),
                ("@vuln-easy".into(), "@ok".into()),
            ]))
            .for_tier("adv"),
        ])
    }

    #[tokio::test]
    async fn hybrid_resolves_in_two_stages() {
        let dir = tempfile::tempdir().unwrap();
        let root = marker_project(dir.path(), 3, 2, 2);
        let analyzer = marker_analyzer();
        let issues = analyzer.scan(&root).unwrap();
        assert_eq!(issues.len(), 7);
        let orch = Orchestrator::new(gateway_with(tiered_provider()), PromptBuilder::default());
        let out_root = revised_root_path(&root).unwrap();
        let h = orch
            .hybrid_pipeline(&issues, &root, &out_root, "cheap", "adv", &analyzer)
            .await
            .unwrap();
        let bugs = h.per_type[&IssueType::Bug];
        assert_eq!(bugs, TypeOutcome { total: 5, resolved_stage1: 3, resolved_stage2: 2, unresolved: 0 });
        let vulns = h.per_type[&IssueType::Vulnerability];
        assert_eq!((vulns.resolved_stage1, vulns.resolved_stage2), (2, 0));
        // only a.py had leftovers
        assert_eq!(h.stage2.results.len(), 1);
        assert_eq!(h.stage2.results[0].file_location, "src/a.py");
        h.ledger.validate().unwrap();
        let hy = h.ledger.get(IssueType::Bug, Strategy::Hybrid).unwrap();
        assert_eq!(hy.issues_resolved, 5);
        let final_a = std::fs::read_to_string(out_root.join("src/Revised.a.py")).unwrap();
        assert!(!final_a.contains("@bug"));
        assert!(out_root.join("src/Revised.b.py").is_file());
        assert!(!out_root.join("src/Revised.clean.py").exists());
        let v = h.ledger.get(IssueType::Vulnerability, Strategy::AdvancedOnRemaining).unwrap();
        assert_eq!((v.issues_total, v.issues_resolved, v.cost_usd), (0, 0, Decimal::ZERO));
    }

    #[tokio::test]
    async fn hybrid_with_nothing_left_skips_stage_two() {
        let dir = tempfile::tempdir().unwrap();
        let root = marker_project(dir.path(), 2, 0, 1);
        let analyzer = marker_analyzer();
        let issues = analyzer.scan(&root).unwrap();
        let orch = Orchestrator::new(gateway_with(tiered_provider()), PromptBuilder::default());
        let h = orch
            .hybrid_pipeline(&issues, &root, &dir.path().join("out"), "cheap", "adv", &analyzer)
            .await
            .unwrap();
        assert!(h.stage2.results.is_empty());
        assert_eq!(h.ledger.total_cost(Strategy::Hybrid), Some(h.stage1.total_cost()));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn output_tree_mirrors_input(paths in prop::collection::btree_set("[a-c]{1,2}(/[a-c]{1,2}){0,2}\\.py", 1..8)) {
            let rt = tokio::runtime::Builder::new_current_thread().enable_all().build().unwrap();
            let dir = tempfile::tempdir().unwrap();
            let root = dir.path().join("P");
            let mut issues = Vec::new();
            let mut wanted = Vec::new();
            for (n, p) in paths.iter().enumerate() {
                // Skip paths whose prefix is already a file.
                let full = root.join(p);
                if full.ancestors().skip(1).any(|a| a.is_file()) || full.is_dir() {
                    continue;
                }
                std::fs::create_dir_all(full.parent().unwrap()).unwrap();
                std::fs::write(&full, "a\n").unwrap();
                if n % 2 == 0 {
                    issues.push(IssueRecord::new(p, 1, "m", IssueType::Bug).unwrap());
                    wanted.push(revised_relative_path(p).unwrap());
                }
            }
            let provider = MockProvider::new(vec![MockRule::new("**", "", RuleAction::Replace("b\n".into()))]);
            let orch = Orchestrator::new(gateway_with(provider), PromptBuilder::default());
            let out_root = revised_root_path(&root).unwrap();
            let out = rt.block_on(orch.revise_all(&issues, &root, &out_root, "cheap")).unwrap();
            wanted.sort();
            prop_assert_eq!(&out.written, &wanted);
            let mut on_disk: Vec<String> = if out_root.exists() {
                WalkDir::new(&out_root).into_iter().filter_map(|e| e.ok())
                    .filter(|e| e.file_type().is_file())
                    .map(|e| crate::analyzer::relative_location(&out_root, e.path()))
                    .collect()
            } else { Vec::new() };
            on_disk.sort();
            prop_assert_eq!(on_disk, wanted);
        }
    }
}
