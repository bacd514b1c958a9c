//! Provider-agnostic chat completion with retries, concurrency limits,
//! token accounting and dollar cost.

mod extract;
pub mod mock;
pub mod openai;
mod pricing;

use std::collections::BTreeMap;
use std::sync::Arc;
use std::time::{Duration, Instant};

use async_trait::async_trait;
use rust_decimal::Decimal;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use tokio::sync::{Mutex, Semaphore};

use crate::prompt::PromptSpec;

pub use extract::extract_code;
pub use pricing::{compute_cost, raw_cost, ModelPricing, PricingError, PricingTable};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenUsage {
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
}

impl TokenUsage {
    pub fn new(prompt_tokens: u64, completion_tokens: u64) -> Self {
        TokenUsage {
            prompt_tokens,
            completion_tokens,
        }
    }

    pub fn total(&self) -> u64 {
        self.prompt_tokens + self.completion_tokens
    }
}

impl std::ops::Add for TokenUsage {
    type Output = TokenUsage;

    fn add(self, rhs: Self) -> Self::Output {
        TokenUsage {
            prompt_tokens: self.prompt_tokens + rhs.prompt_tokens,
            completion_tokens: self.completion_tokens + rhs.completion_tokens,
        }
    }
}

impl std::ops::AddAssign for TokenUsage {
    fn add_assign(&mut self, rhs: Self) {
        *self = *self + rhs;
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompletionResult {
    pub text: String,
    pub usage: TokenUsage,
    pub model_id: String,
    pub latency_ms: u64,
    pub attempts: u32,
}

/// What a provider sees for one call.
#[derive(Debug, Clone, Copy)]
pub struct CompletionRequest<'a> {
    pub model_id: &'a str,
    pub prompt: &'a PromptSpec,
    pub temperature: f32,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProviderResponse {
    pub text: String,
    pub usage: TokenUsage,
}

/// Errors a provider reports for a single attempt.
#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum ProviderError {
    #[error("authentication failed: {0}")]
    Auth(String),
    #[error("rate limited: {0}")]
    RateLimited(String),
    /// Timeouts, 5xx, connection resets. Retried.
    #[error("transient failure: {0}")]
    Transient(String),
    #[error("provider error: {0}")]
    Fatal(String),
}

impl ProviderError {
    fn is_retryable(&self) -> bool {
        matches!(self, ProviderError::RateLimited(_) | ProviderError::Transient(_))
    }
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum GatewayError {
    #[error("provider rejected credentials: {0}")]
    ProviderAuthError(String),
    #[error("rate limited after {attempts} attempts: {message}")]
    RateLimited { message: String, attempts: u32 },
    #[error("provider failed after {attempts} attempt(s): {message}")]
    ProviderError { message: String, attempts: u32 },
    #[error("model `{0}` is not registered")]
    UnknownModel(String),
}

#[async_trait]
pub trait CompletionProvider: Send + Sync {
    async fn complete(&self, request: CompletionRequest<'_>) -> Result<ProviderResponse, ProviderError>;
}

#[derive(Debug, Clone)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub base_delay: Duration,
    pub max_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_attempts: 3,
            base_delay: Duration::from_millis(500),
            max_delay: Duration::from_secs(8),
        }
    }
}

impl RetryPolicy {
    /// No waiting between attempts (tests).
    pub fn immediate() -> Self {
        RetryPolicy {
            base_delay: Duration::ZERO,
            max_delay: Duration::ZERO,
            ..Default::default()
        }
    }

    fn delay(&self, failed_attempt: u32) -> Duration {
        let factor = 1u32 << failed_attempt.saturating_sub(1).min(16);
        self.base_delay.saturating_mul(factor).min(self.max_delay)
    }
}

/// Token bucket for request-rate limiting.
#[derive(Debug)]
pub struct TokenBucket {
    capacity: f64,
    refill_per_sec: f64,
    state: Mutex<(f64, Instant)>,
}

impl TokenBucket {
    pub fn new(capacity: u32, refill_per_sec: f64) -> Self {
        TokenBucket {
            capacity: capacity.max(1) as f64,
            refill_per_sec: refill_per_sec.max(f64::MIN_POSITIVE),
            state: Mutex::new((capacity.max(1) as f64, Instant::now())),
        }
    }

    pub async fn acquire(&self) {
        loop {
            let wait = {
                let mut state = self.state.lock().await;
                let now = Instant::now();
                let elapsed = now.duration_since(state.1).as_secs_f64();
                state.0 = (state.0 + elapsed * self.refill_per_sec).min(self.capacity);
                state.1 = now;
                if state.0 >= 1.0 {
                    state.0 -= 1.0;
                    return;
                }
                Duration::from_secs_f64((1.0 - state.0) / self.refill_per_sec)
            };
            tokio::time::sleep(wait).await;
        }
    }
}

/// Per-provider limits.
#[derive(Debug, Clone)]
pub struct ProviderLimits {
    pub max_in_flight: usize,
    /// Requests per second; `None` disables rate limiting.
    pub requests_per_sec: Option<f64>,
    pub burst: u32,
}

impl Default for ProviderLimits {
    fn default() -> Self {
        ProviderLimits {
            max_in_flight: 8,
            requests_per_sec: None,
            burst: 1,
        }
    }
}

struct ProviderSlot {
    provider: Arc<dyn CompletionProvider>,
    in_flight: Arc<Semaphore>,
    bucket: Option<Arc<TokenBucket>>,
}

#[derive(Clone)]
struct Route {
    provider: String,
    slot: Arc<ProviderSlot>,
}

/// Routes completion requests to registered providers.
#[derive(Clone)]
pub struct Gateway {
    providers: BTreeMap<String, Arc<ProviderSlot>>,
    models: BTreeMap<String, Route>,
    pricing: PricingTable,
    retry: RetryPolicy,
    timeout: Duration,
    seed: Option<u64>,
}

impl Default for Gateway {
    fn default() -> Self {
        Gateway::new(PricingTable::default())
    }
}

impl Gateway {
    pub fn new(pricing: PricingTable) -> Self {
        Gateway {
            providers: BTreeMap::new(),
            models: BTreeMap::new(),
            pricing,
            retry: RetryPolicy::default(),
            timeout: Duration::from_secs(120),
            seed: Some(0),
        }
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    pub fn with_timeout(mut self, timeout: Duration) -> Self {
        self.timeout = timeout;
        self
    }

    pub fn with_seed(mut self, seed: Option<u64>) -> Self {
        self.seed = seed;
        self
    }

    pub fn register_provider(
        &mut self,
        name: impl Into<String>,
        provider: Arc<dyn CompletionProvider>,
        limits: ProviderLimits,
    ) {
        let slot = ProviderSlot {
            provider,
            in_flight: Arc::new(Semaphore::new(limits.max_in_flight.max(1))),
            bucket: limits
                .requests_per_sec
                .map(|rps| Arc::new(TokenBucket::new(limits.burst, rps))),
        };
        self.providers.insert(name.into(), Arc::new(slot));
    }

    /// Routes `model_id` to a previously registered provider.
    pub fn register_model(&mut self, model_id: impl Into<String>, provider: &str) -> Result<(), GatewayError> {
        let slot = self
            .providers
            .get(provider)
            .cloned()
            .ok_or_else(|| GatewayError::ProviderError {
                message: format!("provider `{provider}` is not registered"),
                attempts: 0,
            })?;
        self.models.insert(
            model_id.into(),
            Route {
                provider: provider.to_string(),
                slot,
            },
        );
        Ok(())
    }

    pub fn models(&self) -> Vec<String> {
        self.models.keys().cloned().collect()
    }

    pub fn provider_of(&self, model_id: &str) -> Option<&str> {
        self.models.get(model_id).map(|r| r.provider.as_str())
    }

    pub fn has_model(&self, model_id: &str) -> bool {
        self.models.contains_key(model_id)
    }

    pub fn pricing(&self) -> &PricingTable {
        &self.pricing
    }

    /// Dollar cost of `usage` on `model_id`; unpriced models cost nothing.
    pub fn cost(&self, model_id: &str, usage: TokenUsage) -> Decimal {
        match self.pricing.get(model_id) {
            Some(p) => compute_cost(usage, p),
            None => Decimal::ZERO,
        }
    }

    pub async fn complete(&self, prompt: &PromptSpec, model_id: &str) -> Result<CompletionResult, GatewayError> {
        let route = self
            .models
            .get(model_id)
            .ok_or_else(|| GatewayError::UnknownModel(model_id.to_string()))?;
        let slot = &route.slot;
        let request = CompletionRequest {
            model_id,
            prompt,
            temperature: 0.0,
            seed: self.seed,
        };
        let started = Instant::now();
        let mut attempt = 0;
        loop {
            attempt += 1;
            let outcome = {
                let _permit = slot.in_flight.acquire().await.expect("semaphore never closed");
                if let Some(bucket) = &slot.bucket {
                    bucket.acquire().await;
                }
                match tokio::time::timeout(self.timeout, slot.provider.complete(request)).await {
                    Ok(r) => r,
                    Err(_) => Err(ProviderError::Transient(format!(
                        "timed out after {}s",
                        self.timeout.as_secs()
                    ))),
                }
            };
            match outcome {
                Ok(resp) => {
                    return Ok(CompletionResult {
                        text: resp.text,
                        usage: resp.usage,
                        model_id: model_id.to_string(),
                        latency_ms: started.elapsed().as_millis() as u64,
                        attempts: attempt,
                    })
                }
                Err(err) if err.is_retryable() && attempt < self.retry.max_attempts => {
                    tracing::debug!(model = model_id, attempt, error = %err, "retrying completion");
                    let delay = self.retry.delay(attempt);
                    if !delay.is_zero() {
                        tokio::time::sleep(delay).await;
                    }
                }
                Err(ProviderError::Auth(m)) => return Err(GatewayError::ProviderAuthError(m)),
                Err(ProviderError::RateLimited(message)) => {
                    return Err(GatewayError::RateLimited {
                        message,
                        attempts: attempt,
                    })
                }
                Err(ProviderError::Transient(message)) | Err(ProviderError::Fatal(message)) => {
                    return Err(GatewayError::ProviderError {
                        message,
                        attempts: attempt,
                    })
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::mock::{MockProvider, MockRule, RuleAction};
    use super::*;
    use crate::issues::{IssueRecord, IssueType};
    use crate::prompt::{Mode, PromptBuilder};
    use std::str::FromStr;

    fn prompt_for(path: &str, message: &str, body: &str) -> PromptSpec {
        let issues = vec![IssueRecord::new(path, 1, message, IssueType::CodeSmell).unwrap()];
        PromptBuilder::default().build(body, &issues, Mode::Batch, None).unwrap()
    }

    fn gateway_with(mock: MockProvider) -> (Gateway, Arc<MockProvider>) {
        let mock = Arc::new(mock);
        let mut gw = Gateway::default().with_retry(RetryPolicy::immediate());
        gw.register_provider("mock", mock.clone(), ProviderLimits::default());
        gw.register_model("gpt-3.5-turbo", "mock").unwrap();
        gw.register_model("gpt-4o", "mock").unwrap();
        (gw, mock)
    }

    #[tokio::test]
    async fn mock_rule_emits_fixture() {
        let fixed = "export default function App() {\n  return <Main />;\n}\n";
        let mock = MockProvider::new(vec![MockRule::new("**/App.jsx", "redundant", RuleAction::Replace(fixed.into()))]);
        let (gw, _) = gateway_with(mock);
        let p = prompt_for("client/src/App.jsx", "A fragment with only one child is redundant.", "old\n");
        let r = gw.complete(&p, "gpt-3.5-turbo").await.unwrap();
        assert_eq!(extract_code(&r.text), fixed);
        assert_eq!(r.model_id, "gpt-3.5-turbo");
        assert_eq!(r.attempts, 1);
    }

    #[tokio::test]
    async fn unknown_model() {
        let (gw, _) = gateway_with(MockProvider::new(vec![]));
        let p = prompt_for("a.py", "m", "x\n");
        assert_eq!(
            gw.complete(&p, "gpt-99").await.unwrap_err(),
            GatewayError::UnknownModel("gpt-99".into())
        );
    }

    #[tokio::test]
    async fn transient_failures_are_retried() {
        let rule = MockRule::new("**", "", RuleAction::Replace("ok\n".into())).with_transient_failures(2);
        let (gw, mock) = gateway_with(MockProvider::new(vec![rule]));
        let p = prompt_for("a.py", "m", "x\n");
        let r = gw.complete(&p, "gpt-4o").await.unwrap();
        assert_eq!(r.attempts, 3);
        assert_eq!(mock.calls(), 3);
    }

    #[tokio::test]
    async fn retries_are_bounded() {
        let rule = MockRule::new("**", "", RuleAction::Replace("ok\n".into())).with_transient_failures(5);
        let (gw, mock) = gateway_with(MockProvider::new(vec![rule]));
        let p = prompt_for("a.py", "m", "x\n");
        let err = gw.complete(&p, "gpt-4o").await.unwrap_err();
        assert_eq!(
            err,
            GatewayError::ProviderError {
                message: "mock transient failure".into(),
                attempts: 3
            }
        );
        assert_eq!(mock.calls(), 3);
    }

    #[tokio::test]
    async fn rate_limit_and_auth_mapping() {
        let (gw, mock) = gateway_with(MockProvider::new(vec![MockRule::new("**", "", RuleAction::RateLimit)]));
        let p = prompt_for("a.py", "m", "x\n");
        assert!(matches!(
            gw.complete(&p, "gpt-4o").await,
            Err(GatewayError::RateLimited { attempts: 3, .. })
        ));
        assert_eq!(mock.calls(), 3);

        let (gw, mock) = gateway_with(MockProvider::new(vec![MockRule::new("**", "", RuleAction::AuthFail)]));
        assert!(matches!(
            gw.complete(&p, "gpt-4o").await,
            Err(GatewayError::ProviderAuthError(_))
        ));
        assert_eq!(mock.calls(), 1);
    }

    #[tokio::test]
    async fn timeout_is_transient() {
        struct Slow;
        #[async_trait]
        impl CompletionProvider for Slow {
            async fn complete(&self, _r: CompletionRequest<'_>) -> Result<ProviderResponse, ProviderError> {
                tokio::time::sleep(Duration::from_secs(5)).await;
                unreachable!()
            }
        }
        let mut gw = Gateway::default()
            .with_retry(RetryPolicy::immediate())
            .with_timeout(Duration::from_millis(10));
        gw.register_provider("slow", Arc::new(Slow), ProviderLimits::default());
        gw.register_model("m", "slow").unwrap();
        let p = prompt_for("a.py", "m", "x\n");
        assert!(matches!(
            gw.complete(&p, "m").await,
            Err(GatewayError::ProviderError { attempts: 3, .. })
        ));
    }

    #[tokio::test]
    async fn in_flight_limit_is_respected() {
        use std::sync::atomic::{AtomicUsize, Ordering};
        struct Counting {
            now: AtomicUsize,
            peak: AtomicUsize,
        }
        #[async_trait]
        impl CompletionProvider for Counting {
            async fn complete(&self, _r: CompletionRequest<'_>) -> Result<ProviderResponse, ProviderError> {
                let n = self.now.fetch_add(1, Ordering::SeqCst) + 1;
                self.peak.fetch_max(n, Ordering::SeqCst);
                tokio::time::sleep(Duration::from_millis(5)).await;
                self.now.fetch_sub(1, Ordering::SeqCst);
                Ok(ProviderResponse {
                    text: "x\n".into(),
                    usage: TokenUsage::default(),
                })
            }
        }
        let provider = Arc::new(Counting {
            now: AtomicUsize::new(0),
            peak: AtomicUsize::new(0),
        });
        let mut gw = Gateway::default();
        gw.register_provider(
            "c",
            provider.clone(),
            ProviderLimits {
                max_in_flight: 2,
                ..Default::default()
            },
        );
        gw.register_model("m", "c").unwrap();
        let p = prompt_for("a.py", "m", "x\n");
        let calls = (0..8).map(|_| gw.complete(&p, "m"));
        for r in futures::future::join_all(calls).await {
            r.unwrap();
        }
        assert!(provider.peak.load(Ordering::SeqCst) <= 2);
    }

    #[test]
    fn backoff_grows_and_caps() {
        let r = RetryPolicy {
            max_attempts: 3,
            base_delay: Duration::from_millis(100),
            max_delay: Duration::from_millis(250),
        };
        assert_eq!(r.delay(1), Duration::from_millis(100));
        assert_eq!(r.delay(2), Duration::from_millis(200));
        assert_eq!(r.delay(3), Duration::from_millis(250));
    }

    #[test]
    fn gateway_cost_uses_pricing() {
        let mut table = PricingTable::default();
        table.insert(ModelPricing::new("m", Decimal::from_str("0.50").unwrap(), Decimal::from_str("1.50").unwrap()).unwrap());
        let gw = Gateway::new(table);
        assert_eq!(gw.cost("m", TokenUsage::new(1000, 1000)), Decimal::from_str("2.0000").unwrap());
        assert_eq!(gw.cost("other", TokenUsage::new(1000, 1000)), Decimal::ZERO);
    }
}
