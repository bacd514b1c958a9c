//! Deterministic rule-based provider.
//!
//! A fixture is an ordered list of rules. A rule matches a request when its
//! path glob matches the target file, its message substring occurs in at
//! least one targeted issue, and its tier is `*` or the tier of the requested
//! model. The first matching rule decides the response; with no match the
//! original file is echoed back.
//!
//! ```toml
//! [tiers]
//! "gpt-3.5-turbo" = "cheap"
//! "gpt-4o" = "advanced"
//!
//! [[rule]]
//! path = "**/App.jsx"
//! message = "redundant"
//! action = "replace"
//! content_file = "fixed/App.jsx"
//!
//! [[rule]]
//! path = "**"
//! tier = "cheap"
//! action = "rewrite"
//! rewrites = [["@bug-easy", "@ok"]]
//! ```

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::atomic::{AtomicU32, AtomicUsize, Ordering};

use async_trait::async_trait;
use globset::{Glob, GlobMatcher};
use serde::Deserialize;
use thiserror::Error;

use super::{CompletionProvider, CompletionRequest, ProviderError, ProviderResponse, TokenUsage};
use crate::prompt::estimate_tokens;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RuleAction {
    /// Respond with this file content.
    Replace(String),
    /// Respond with the original content after literal substitutions.
    Rewrite(Vec<(String, String)>),
    /// Echo the original content unchanged.
    Refuse,
    /// Permanent provider error.
    Fail,
    RateLimit,
    AuthFail,
}

#[derive(Debug)]
pub struct MockRule {
    path: GlobMatcher,
    message: String,
    tier: String,
    action: RuleAction,
    transient_failures: u32,
    failures_so_far: AtomicU32,
    usage: Option<TokenUsage>,
    fence: bool,
}

impl MockRule {
    pub fn new(path_glob: &str, message: &str, action: RuleAction) -> Self {
        MockRule {
            path: Glob::new(path_glob).expect("valid glob").compile_matcher(),
            message: message.to_string(),
            tier: "*".into(),
            action,
            transient_failures: 0,
            failures_so_far: AtomicU32::new(0),
            usage: None,
            fence: true,
        }
    }

    pub fn for_tier(mut self, tier: &str) -> Self {
        self.tier = tier.to_string();
        self
    }

    /// Fail the first `n` matching calls with a transient error.
    pub fn with_transient_failures(mut self, n: u32) -> Self {
        self.transient_failures = n;
        self
    }

    /// Report fixed token usage instead of the character-based estimate.
    pub fn with_usage(mut self, usage: TokenUsage) -> Self {
        self.usage = Some(usage);
        self
    }

    fn matches(&self, path: &str, messages: &[&str], tier: &str) -> bool {
        (self.tier == "*" || self.tier == tier)
            && self.path.is_match(path)
            && (self.message.is_empty() || messages.iter().any(|m| m.contains(&self.message)))
    }
}

#[derive(Debug, Error)]
pub enum FixtureError {
    #[error("cannot read fixture {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("invalid fixture: {0}")]
    Parse(String),
    #[error("rule {rule}: {reason}")]
    Rule { rule: usize, reason: String },
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct FixtureFile {
    #[serde(default)]
    tiers: BTreeMap<String, String>,
    #[serde(default, rename = "rule")]
    rules: Vec<RuleSpec>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RuleSpec {
    #[serde(default = "any_path")]
    path: String,
    #[serde(default)]
    message: String,
    #[serde(default = "any_tier")]
    tier: String,
    action: String,
    content: Option<String>,
    content_file: Option<String>,
    #[serde(default)]
    rewrites: Vec<(String, String)>,
    #[serde(default)]
    transient_failures: u32,
    prompt_tokens: Option<u64>,
    completion_tokens: Option<u64>,
    #[serde(default = "yes")]
    fence: bool,
}

fn any_path() -> String {
    "**".into()
}

fn any_tier() -> String {
    "*".into()
}

fn yes() -> bool {
    true
}

#[derive(Debug, Default)]
pub struct MockProvider {
    tiers: BTreeMap<String, String>,
    rules: Vec<MockRule>,
    calls: AtomicUsize,
}

impl MockProvider {
    pub fn new(rules: Vec<MockRule>) -> Self {
        MockProvider {
            tiers: BTreeMap::new(),
            rules,
            calls: AtomicUsize::new(0),
        }
    }

    pub fn with_tier(mut self, model_id: &str, tier: &str) -> Self {
        self.tiers.insert(model_id.to_string(), tier.to_string());
        self
    }

    /// Parses a TOML fixture; `content_file` paths resolve against `base_dir`.
    pub fn from_toml(text: &str, base_dir: &Path) -> Result<Self, FixtureError> {
        let file: FixtureFile = toml::from_str(text).map_err(|e| FixtureError::Parse(e.to_string()))?;
        let mut rules = Vec::with_capacity(file.rules.len());
        for (i, spec) in file.rules.into_iter().enumerate() {
            let n = i + 1;
            let err = |reason: String| FixtureError::Rule { rule: n, reason };
            let action = match spec.action.to_ascii_lowercase().as_str() {
                "replace" => {
                    let content = match (spec.content, spec.content_file) {
                        (Some(c), None) => c,
                        (None, Some(f)) => {
                            let p = base_dir.join(&f);
                            std::fs::read_to_string(&p).map_err(|e| err(format!("{}: {e}", p.display())))?
                        }
                        _ => return Err(err("replace needs exactly one of content/content_file".into())),
                    };
                    RuleAction::Replace(content)
                }
                "rewrite" => RuleAction::Rewrite(spec.rewrites),
                "refuse" => RuleAction::Refuse,
                "fail" => RuleAction::Fail,
                "rate_limit" => RuleAction::RateLimit,
                "auth_fail" => RuleAction::AuthFail,
                other => return Err(err(format!("unknown action `{other}`"))),
            };
            let path = Glob::new(&spec.path)
                .map_err(|e| err(e.to_string()))?
                .compile_matcher();
            let usage = match (spec.prompt_tokens, spec.completion_tokens) {
                (None, None) => None,
                (p, c) => Some(TokenUsage::new(p.unwrap_or(0), c.unwrap_or(0))),
            };
            rules.push(MockRule {
                path,
                message: spec.message,
                tier: spec.tier,
                action,
                transient_failures: spec.transient_failures,
                failures_so_far: AtomicU32::new(0),
                usage,
                fence: spec.fence,
            });
        }
        Ok(MockProvider {
            tiers: file.tiers,
            rules,
            calls: AtomicUsize::new(0),
        })
    }

    pub fn load(path: &Path) -> Result<Self, FixtureError> {
        let text = std::fs::read_to_string(path).map_err(|source| FixtureError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        Self::from_toml(&text, base)
    }

    /// Model ids declared in the fixture's `[tiers]` table.
    pub fn declared_models(&self) -> Vec<String> {
        self.tiers.keys().cloned().collect()
    }

    pub fn tier_of<'a>(&'a self, model_id: &'a str) -> &'a str {
        self.tiers.get(model_id).map(String::as_str).unwrap_or(model_id)
    }

    /// Total calls received, including failed ones.
    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}

#[async_trait]
impl CompletionProvider for MockProvider {
    async fn complete(&self, request: CompletionRequest<'_>) -> Result<ProviderResponse, ProviderError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        let target = &request.prompt.target;
        let tier = self.tier_of(request.model_id);
        let messages: Vec<&str> = target.issues.iter().map(|i| i.message.as_str()).collect();
        let rule = self
            .rules
            .iter()
            .find(|r| r.matches(&target.file_location, &messages, tier));

        let (body, fence, fixed_usage) = match rule {
            None => (target.original.clone(), true, None),
            Some(rule) => {
                if rule.failures_so_far.load(Ordering::SeqCst) < rule.transient_failures {
                    rule.failures_so_far.fetch_add(1, Ordering::SeqCst);
                    return Err(ProviderError::Transient("mock transient failure".into()));
                }
                let body = match &rule.action {
                    RuleAction::Replace(content) => content.clone(),
                    RuleAction::Rewrite(pairs) => pairs
                        .iter()
                        .fold(target.original.clone(), |acc, (from, to)| acc.replace(from, to)),
                    RuleAction::Refuse => target.original.clone(),
                    RuleAction::Fail => return Err(ProviderError::Fatal("mock provider failure".into())),
                    RuleAction::RateLimit => return Err(ProviderError::RateLimited("mock rate limit".into())),
                    RuleAction::AuthFail => return Err(ProviderError::Auth("mock rejected key".into())),
                };
                (body, rule.fence, rule.usage)
            }
        };

        let text = if fence {
            let mut t = String::from("```\n");
            t.push_str(&body);
            if !body.ends_with('\n') {
                t.push('\n');
            }
            t.push_str("```\n");
            t
        } else {
            body
        };
        let usage = fixed_usage.unwrap_or_else(|| {
            TokenUsage::new(
                (estimate_tokens(&request.prompt.system_text) + estimate_tokens(&request.prompt.user_text)) as u64,
                estimate_tokens(&text) as u64,
            )
        });
        Ok(ProviderResponse { text, usage })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::issues::{IssueRecord, IssueType};
    use crate::prompt::{Mode, PromptBuilder, PromptSpec};

    fn prompt(path: &str, msg: &str, body: &str) -> PromptSpec {
        let issues = vec![IssueRecord::new(path, 1, msg, IssueType::Bug).unwrap()];
        PromptBuilder::default().build(body, &issues, Mode::Batch, None).unwrap()
    }

    fn req<'a>(model: &'a str, p: &'a PromptSpec) -> CompletionRequest<'a> {
        CompletionRequest {
            model_id: model,
            prompt: p,
            temperature: 0.0,
            seed: None,
        }
    }

    #[tokio::test]
    async fn fixture_tiers_and_rewrites() {
        let text = r#"
[tiers]
"gpt-3.5-turbo" = "cheap"
"gpt-4o" = "advanced"

[[rule]]
tier = "cheap"
action = "rewrite"
rewrites = [["EASY", "ok"]]

[[rule]]
tier = "advanced"
action = "rewrite"
rewrites = [["EASY", "ok"], ["HARD", "ok"]]
"#;
        let mock = MockProvider::from_toml(text, Path::new(".")).unwrap();
        assert_eq!(mock.declared_models(), vec!["gpt-3.5-turbo", "gpt-4o"]);
        let p = prompt("a.py", "m", "EASY\nHARD\n");
        let cheap = mock.complete(req("gpt-3.5-turbo", &p)).await.unwrap();
        assert_eq!(cheap.text, "```\nok\nHARD\n```\n");
        let adv = mock.complete(req("gpt-4o", &p)).await.unwrap();
        assert_eq!(adv.text, "```\nok\nok\n```\n");
        assert_eq!(mock.calls(), 2);
    }

    #[tokio::test]
    async fn unmatched_echoes_original_deterministically() {
        let mock = MockProvider::new(vec![MockRule::new("**/*.js", "", RuleAction::Fail)]);
        let p = prompt("a.py", "m", "x = 1\n");
        let a = mock.complete(req("m", &p)).await.unwrap();
        let b = mock.complete(req("m", &p)).await.unwrap();
        assert_eq!(a, b);
        assert_eq!(a.text, "```\nx = 1\n```\n");
        assert!(a.usage.prompt_tokens > 0);
    }

    #[tokio::test]
    async fn message_substring_filters() {
        let mock = MockProvider::new(vec![
            MockRule::new("**", "redundant", RuleAction::Replace("fixed\n".into())),
        ]);
        let p = prompt("a.jsx", "A fragment with only one child is redundant.", "old\n");
        assert_eq!(mock.complete(req("m", &p)).await.unwrap().text, "```\nfixed\n```\n");
        let q = prompt("a.jsx", "something else", "old\n");
        assert_eq!(mock.complete(req("m", &q)).await.unwrap().text, "```\nold\n```\n");
    }

    #[test]
    fn fixture_errors() {
        assert!(matches!(
            MockProvider::from_toml("[[rule]]\naction = \"explode\"\n", Path::new(".")),
            Err(FixtureError::Rule { rule: 1, .. })
        ));
        assert!(matches!(
            MockProvider::from_toml("[[rule]]\naction = \"replace\"\n", Path::new(".")),
            Err(FixtureError::Rule { rule: 1, .. })
        ));
        assert!(matches!(
            MockProvider::from_toml("nonsense = 1\n", Path::new(".")),
            Err(FixtureError::Parse(_))
        ));
    }

    #[tokio::test]
    async fn fixed_usage_is_reported() {
        let mock = MockProvider::new(vec![
            MockRule::new("**", "", RuleAction::Refuse).with_usage(TokenUsage::new(1000, 500)),
        ]);
        let p = prompt("a.py", "m", "x\n");
        assert_eq!(mock.complete(req("m", &p)).await.unwrap().usage, TokenUsage::new(1000, 500));
    }
}
