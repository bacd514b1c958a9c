//! Runtime configuration (optional TOML file) and assembly of the gateway and
//! prompt builder from it.

use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use serde::Deserialize;
use thiserror::Error;

use crate::gateway::mock::MockProvider;
use crate::gateway::openai::{OpenAiProvider, DEFAULT_BASE_URL, DEFAULT_KEY_ENV};
use crate::gateway::{Gateway, PricingTable, ProviderLimits, RetryPolicy};
use crate::orchestrator::{Orchestrator, DEFAULT_WORKERS};
use crate::prompt::{FewShotRegistry, PromptBuilder, PromptTemplate, DEFAULT_PROMPT_BUDGET};

pub const DEFAULT_PRICING: &str = include_str!("../assets/pricing.csv");

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {reason}")]
    Read { path: String, reason: String },
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error("referenced file does not exist: {0}")]
    MissingFile(String),
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct OpenAiSection {
    pub base_url: String,
    /// Name of the environment variable holding the key.
    pub api_key_env: String,
    pub models: Vec<String>,
}

impl Default for OpenAiSection {
    fn default() -> Self {
        OpenAiSection {
            base_url: DEFAULT_BASE_URL.into(),
            api_key_env: DEFAULT_KEY_ENV.into(),
            models: vec!["gpt-3.5-turbo".into(), "gpt-4o".into(), "gpt-4o-mini".into()],
        }
    }
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct CliConfig {
    pub pricing: Option<PathBuf>,
    pub template: Option<PathBuf>,
    pub fewshots: Option<PathBuf>,
    /// Serve completions from a mock fixture instead of a live endpoint.
    pub mock_provider: Option<PathBuf>,
    pub workers: usize,
    pub prompt_budget: usize,
    pub timeout_secs: u64,
    pub max_attempts: u32,
    pub max_in_flight: usize,
    pub requests_per_sec: Option<f64>,
    pub seed: Option<u64>,
    pub openai: OpenAiSection,
}

impl Default for CliConfig {
    fn default() -> Self {
        CliConfig {
            pricing: None,
            template: None,
            fewshots: None,
            mock_provider: None,
            workers: DEFAULT_WORKERS,
            prompt_budget: DEFAULT_PROMPT_BUDGET,
            timeout_secs: 120,
            max_attempts: 3,
            max_in_flight: 8,
            requests_per_sec: None,
            seed: Some(0),
            openai: OpenAiSection::default(),
        }
    }
}

impl CliConfig {
    /// Parses TOML; relative paths are resolved against `base_dir`.
    pub fn from_toml(text: &str, base_dir: &Path) -> Result<Self, ConfigError> {
        let mut cfg: CliConfig = toml::from_str(text).map_err(|e| ConfigError::Invalid(e.to_string()))?;
        for p in [&mut cfg.pricing, &mut cfg.template, &mut cfg.fewshots, &mut cfg.mock_provider]
            .into_iter()
            .flatten()
        {
            if p.is_relative() {
                *p = base_dir.join(&*p);
            }
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Read {
            path: path.display().to_string(),
            reason: e.to_string(),
        })?;
        Self::from_toml(&text, path.parent().unwrap_or_else(|| Path::new(".")))
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.workers == 0 {
            return Err(ConfigError::Invalid("workers must be at least 1".into()));
        }
        if self.max_attempts == 0 {
            return Err(ConfigError::Invalid("max_attempts must be at least 1".into()));
        }
        if self.max_in_flight == 0 {
            return Err(ConfigError::Invalid("max_in_flight must be at least 1".into()));
        }
        for p in [&self.pricing, &self.template, &self.fewshots, &self.mock_provider]
            .into_iter()
            .flatten()
        {
            if !p.is_file() {
                return Err(ConfigError::MissingFile(p.display().to_string()));
            }
        }
        Ok(())
    }

    pub fn pricing_table(&self) -> Result<PricingTable, ConfigError> {
        match &self.pricing {
            Some(p) => PricingTable::load(p).map_err(|e| ConfigError::Invalid(format!("{}: {e}", p.display()))),
            None => Ok(PricingTable::from_reader(DEFAULT_PRICING.as_bytes()).expect("bundled pricing parses")),
        }
    }

    pub fn prompt_builder(&self) -> Result<PromptBuilder, ConfigError> {
        let template = match &self.template {
            Some(p) => PromptTemplate::load(p).map_err(|e| ConfigError::Invalid(e.to_string()))?,
            None => PromptTemplate::default(),
        };
        let registry = match &self.fewshots {
            Some(p) => FewShotRegistry::load(p).map_err(|e| ConfigError::Invalid(e.to_string()))?,
            None => FewShotRegistry::bundled(),
        };
        Ok(PromptBuilder::new(template, registry).with_budget(self.prompt_budget))
    }

    fn limits(&self) -> ProviderLimits {
        ProviderLimits {
            max_in_flight: self.max_in_flight,
            requests_per_sec: self.requests_per_sec,
            burst: 1,
        }
    }

    /// Builds the gateway. With `mock_provider` set every model declared in
    /// the fixture routes to it; otherwise the configured OpenAI models do.
    pub fn gateway(&self) -> Result<Gateway, ConfigError> {
        let timeout = Duration::from_secs(self.timeout_secs);
        let mut gw = Gateway::new(self.pricing_table()?)
            .with_timeout(timeout)
            .with_seed(self.seed)
            .with_retry(RetryPolicy {
                max_attempts: self.max_attempts,
                ..RetryPolicy::default()
            });
        match &self.mock_provider {
            Some(path) => {
                let mock = MockProvider::load(path).map_err(|e| ConfigError::Invalid(e.to_string()))?;
                let models = mock.declared_models();
                if models.is_empty() {
                    return Err(ConfigError::Invalid(format!(
                        "{}: mock fixture declares no models in [tiers]",
                        path.display()
                    )));
                }
                gw.register_provider("mock", Arc::new(mock), self.limits());
                for m in models {
                    gw.register_model(m, "mock").expect("provider registered");
                }
            }
            None => {
                // A missing key surfaces as an auth failure on first use.
                let key = std::env::var(&self.openai.api_key_env).unwrap_or_default();
                let provider = OpenAiProvider::new(&self.openai.base_url, key, timeout)
                    .map_err(|e| ConfigError::Invalid(e.to_string()))?;
                gw.register_provider("openai", Arc::new(provider), self.limits());
                for m in &self.openai.models {
                    gw.register_model(m.clone(), "openai").expect("provider registered");
                }
            }
        }
        Ok(gw)
    }

    pub fn orchestrator(&self) -> Result<Orchestrator, ConfigError> {
        self.validate()?;
        Ok(Orchestrator::new(Arc::new(self.gateway()?), self.prompt_builder()?).with_workers(self.workers))
    }
}
