//! Revision prompt composition.
//!
//! A prompt is rendered from a versioned template (system and user sections
//! with `{{placeholder}}` slots) plus few-shot examples selected by language
//! family. Batch prompts are frozen; interactive prompts accept an override.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::issues::{IssueRecord, IssueType};

pub const DEFAULT_TEMPLATE: &str = include_str!("../assets/prompt_template.txt");
pub const DEFAULT_FEWSHOTS: &str = include_str!("../assets/fewshots.jsonl");

/// Default prompt budget, in estimated tokens.
pub const DEFAULT_PROMPT_BUDGET: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Whole-project processing; the prompt is fixed.
    Batch,
    /// One-by-one processing; the prompt may be edited.
    Interactive,
}

impl std::str::FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "batch" => Ok(Mode::Batch),
            "interactive" => Ok(Mode::Interactive),
            other => Err(format!("unknown mode `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FewShotExample {
    pub language_tag: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub issue_type: Option<IssueType>,
    pub flawed_snippet: String,
    pub issue_message: String,
    pub fixed_snippet: String,
}

/// The file a prompt is about. Carried alongside the rendered text so that
/// providers (notably the mock) can see what is being revised.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct PromptTarget {
    pub file_location: String,
    pub issues: Vec<IssueRecord>,
    #[serde(skip)]
    pub original: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptSpec {
    pub system_text: String,
    pub user_text: String,
    pub examples: Vec<FewShotExample>,
    pub language_tag: String,
    pub editable: bool,
    pub mode: Mode,
    pub target: PromptTarget,
}

impl PromptSpec {
    /// Rough token estimate (four characters per token).
    pub fn estimated_tokens(&self) -> usize {
        estimate_tokens(&self.system_text) + estimate_tokens(&self.user_text)
    }
}

pub fn estimate_tokens(text: &str) -> usize {
    text.chars().count().div_ceil(4)
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PromptError {
    #[error("issues span multiple files: `{first}` and `{other}`")]
    MixedFiles { first: String, other: String },
    #[error("no issues given")]
    EmptyIssueList,
    #[error("prompt needs ~{estimated} tokens, budget is {budget}")]
    PromptTooLarge { estimated: usize, budget: usize },
}

#[derive(Debug, Error)]
pub enum TemplateError {
    #[error("template is missing the [{0}] section")]
    MissingSection(&'static str),
    #[error("unknown template section `{0}`")]
    UnknownSection(String),
    #[error("few-shot registry line {line}: {reason}")]
    Registry { line: usize, reason: String },
    #[error("i/o error reading {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

/// Maps a file name to the language tag used in prompts.
pub fn infer_language(file_name: &str) -> &'static str {
    let base = crate::issues::basename(file_name);
    let lower = base.to_ascii_lowercase();
    if lower == "dockerfile" || lower.starts_with("dockerfile.") {
        return "Dockerfile";
    }
    if lower == "makefile" {
        return "Makefile";
    }
    let ext = match lower.rsplit_once('.') {
        Some((stem, ext)) if !stem.is_empty() => ext,
        _ => return "plain text",
    };
    match ext {
        "py" | "pyi" | "pyw" => "Python",
        "js" | "mjs" | "cjs" => "JavaScript",
        "jsx" => "JavaScript (React)",
        "ts" | "mts" | "cts" => "TypeScript",
        "tsx" => "TypeScript (React)",
        "java" => "Java",
        "kt" | "kts" => "Kotlin",
        "scala" => "Scala",
        "cs" => "C#",
        "c" | "h" => "C",
        "cc" | "cpp" | "cxx" | "hpp" | "hh" => "C++",
        "go" => "Go",
        "rs" => "Rust",
        "rb" => "Ruby",
        "php" => "PHP",
        "swift" => "Swift",
        "yaml" | "yml" => "YAML",
        "json" => "JSON",
        "xml" => "XML",
        "html" | "htm" => "HTML",
        "css" => "CSS",
        "scss" | "sass" => "SCSS",
        "sh" | "bash" => "Shell",
        "ps1" => "PowerShell",
        "tf" => "Terraform",
        "bicep" => "Bicep",
        "sql" => "SQL",
        "md" => "Markdown",
        _ => "plain text",
    }
}

/// Broad family used to pick few-shot examples.
pub fn language_family(tag: &str) -> &'static str {
    match tag {
        "Python" => "python",
        "JavaScript" | "JavaScript (React)" | "TypeScript" | "TypeScript (React)" => "javascript",
        "Java" | "Kotlin" | "Scala" | "C#" => "java",
        "YAML" | "JSON" | "XML" | "Dockerfile" | "Terraform" | "Bicep" => "config",
        _ => "generic",
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplate {
    system: String,
    user: String,
}

impl PromptTemplate {
    pub fn parse(text: &str) -> Result<Self, TemplateError> {
        let mut system: Option<String> = None;
        let mut user: Option<String> = None;
        // 0 = preamble, 1 = system, 2 = user
        let mut section = 0;
        for line in text.lines() {
            let trimmed = line.trim_end();
            match trimmed {
                "[system]" => {
                    section = 1;
                    system = Some(String::new());
                    continue;
                }
                "[user]" => {
                    section = 2;
                    user = Some(String::new());
                    continue;
                }
                _ => {}
            }
            let buf = match section {
                1 => system.as_mut(),
                2 => user.as_mut(),
                _ => {
                    if trimmed.is_empty() || trimmed.starts_with('#') {
                        continue;
                    }
                    return Err(TemplateError::UnknownSection(trimmed.to_string()));
                }
            };
            let buf = buf.expect("section opened");
            buf.push_str(line);
            buf.push('\n');
        }
        let system = system.ok_or(TemplateError::MissingSection("system"))?;
        let user = user.ok_or(TemplateError::MissingSection("user"))?;
        Ok(PromptTemplate {
            system: system.trim_end().to_string(),
            user: user.trim_end().to_string(),
        })
    }

    pub fn load(path: &Path) -> Result<Self, TemplateError> {
        let text = std::fs::read_to_string(path).map_err(|source| TemplateError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text)
    }
}

impl Default for PromptTemplate {
    fn default() -> Self {
        Self::parse(DEFAULT_TEMPLATE).expect("bundled template parses")
    }
}

/// Single-pass placeholder substitution; substituted values are never re-expanded.
fn render(template: &str, vars: &[(&str, &str)]) -> String {
    let mut out = String::with_capacity(template.len());
    let mut rest = template;
    while let Some(start) = rest.find("{{") {
        out.push_str(&rest[..start]);
        let after = &rest[start + 2..];
        match after.find("}}") {
            Some(end) => {
                let name = after[..end].trim();
                match vars.iter().find(|(k, _)| *k == name) {
                    Some((_, v)) => out.push_str(v),
                    None => out.push_str(&rest[start..start + 2 + end + 2]),
                }
                rest = &after[end + 2..];
            }
            None => {
                out.push_str(&rest[start..]);
                rest = "";
            }
        }
    }
    out.push_str(rest);
    out
}

#[derive(Debug, Clone, Default)]
pub struct FewShotRegistry {
    examples: Vec<FewShotExample>,
}

impl FewShotRegistry {
    /// Parses a JSON Lines registry. Blank lines and `#` comments are skipped.
    pub fn parse(text: &str) -> Result<Self, TemplateError> {
        let mut examples = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let ex: FewShotExample =
                serde_json::from_str(line).map_err(|e| TemplateError::Registry {
                    line: i + 1,
                    reason: e.to_string(),
                })?;
            if ex.language_tag.is_empty()
                || ex.flawed_snippet.is_empty()
                || ex.issue_message.is_empty()
                || ex.fixed_snippet.is_empty()
            {
                return Err(TemplateError::Registry {
                    line: i + 1,
                    reason: "all fields must be non-empty".into(),
                });
            }
            examples.push(ex);
        }
        Ok(FewShotRegistry { examples })
    }

    pub fn load(path: &Path) -> Result<Self, TemplateError> {
        let text = std::fs::read_to_string(path).map_err(|source| TemplateError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text)
    }

    pub fn bundled() -> Self {
        Self::parse(DEFAULT_FEWSHOTS).expect("bundled registry parses")
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    /// Examples of the same family as `language_tag`, falling back to the generic family.
    pub fn select(&self, language_tag: &str) -> Vec<FewShotExample> {
        let family = language_family(language_tag);
        let pick = |fam: &str| -> Vec<FewShotExample> {
            self.examples
                .iter()
                .filter(|e| language_family(&e.language_tag) == fam)
                .cloned()
                .collect()
        };
        let chosen = pick(family);
        if chosen.is_empty() && family != "generic" {
            pick("generic")
        } else {
            chosen
        }
    }
}

#[derive(Debug, Clone)]
pub struct PromptBuilder {
    template: PromptTemplate,
    registry: FewShotRegistry,
    budget_tokens: usize,
}

impl Default for PromptBuilder {
    fn default() -> Self {
        PromptBuilder {
            template: PromptTemplate::default(),
            registry: FewShotRegistry::bundled(),
            budget_tokens: DEFAULT_PROMPT_BUDGET,
        }
    }
}

fn issue_table(issues: &[IssueRecord]) -> String {
    let mut sorted: Vec<&IssueRecord> = issues.iter().collect();
    sorted.sort_by(|a, b| (a.line, &a.message, a.issue_type).cmp(&(b.line, &b.message, b.issue_type)));
    sorted
        .iter()
        .map(|i| format!("- line {} [{}]: {}", i.line, i.issue_type, i.message))
        .collect::<Vec<_>>()
        .join("\n")
}

fn examples_block(examples: &[FewShotExample]) -> String {
    if examples.is_empty() {
        return "(none)".into();
    }
    examples
        .iter()
        .enumerate()
        .map(|(n, e)| {
            format!(
                "Example {} ({}): {}\nBefore:\n{}\nAfter:\n{}",
                n + 1,
                e.language_tag,
                e.issue_message,
                e.flawed_snippet,
                e.fixed_snippet
            )
        })
        .collect::<Vec<_>>()
        .join("\n\n")
}

impl PromptBuilder {
    pub fn new(template: PromptTemplate, registry: FewShotRegistry) -> Self {
        PromptBuilder {
            template,
            registry,
            budget_tokens: DEFAULT_PROMPT_BUDGET,
        }
    }

    pub fn with_budget(mut self, budget_tokens: usize) -> Self {
        self.budget_tokens = budget_tokens;
        self
    }

    pub fn budget(&self) -> usize {
        self.budget_tokens
    }

    /// Composes the prompt for one file and all of its issues.
    ///
    /// Batch mode ignores `override_text`. Interactive mode uses it verbatim
    /// as the user message when present.
    pub fn build(
        &self,
        file_content: &str,
        issues: &[IssueRecord],
        mode: Mode,
        override_text: Option<&str>,
    ) -> Result<PromptSpec, PromptError> {
        let first = issues.first().ok_or(PromptError::EmptyIssueList)?;
        if let Some(other) = issues.iter().find(|i| i.file_location != first.file_location) {
            return Err(PromptError::MixedFiles {
                first: first.file_location.clone(),
                other: other.file_location.clone(),
            });
        }
        let language = infer_language(&first.file_name);
        let examples = self.registry.select(language);
        let vars_table = issue_table(issues);
        let vars_examples = examples_block(&examples);
        let vars = [
            ("language", language),
            ("file_location", first.file_location.as_str()),
            ("file_content", file_content.strip_suffix('\n').unwrap_or(file_content)),
            ("issue_table", vars_table.as_str()),
            ("examples", vars_examples.as_str()),
        ];
        let system_text = render(&self.template.system, &vars);
        let user_text = match (mode, override_text) {
            (Mode::Interactive, Some(o)) => o.to_string(),
            _ => render(&self.template.user, &vars),
        };
        let spec = PromptSpec {
            system_text,
            user_text,
            examples,
            language_tag: language.to_string(),
            editable: mode == Mode::Interactive,
            mode,
            target: PromptTarget {
                file_location: first.file_location.clone(),
                issues: issues.to_vec(),
                original: file_content.to_string(),
            },
        };
        let estimated = spec.estimated_tokens();
        if estimated > self.budget_tokens {
            return Err(PromptError::PromptTooLarge {
                estimated,
                budget: self.budget_tokens,
            });
        }
        Ok(spec)
    }
}
