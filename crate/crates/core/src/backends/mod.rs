//! The four model capabilities the pipeline consumes, with a deterministic
//! mock suite and a JSON-over-HTTP remote client.

pub mod mock;
pub mod remote;
pub mod stub;

use std::fmt;
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use mock::{MockBackend, MockConfig, MockSummarizerMode};
pub use remote::RemoteBackend;

/// Default summarizer input limit, in tokens.
pub const DEFAULT_INPUT_LIMIT: usize = 1024;

/// A dense vector with finite components.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Embedding(Vec<f64>);

impl Embedding {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(
                "embedding has non-finite values".into(),
            ));
        }
        Ok(Embedding(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

impl TryFrom<Vec<f64>> for Embedding {
    type Error = Error;

    fn try_from(values: Vec<f64>) -> Result<Self> {
        Embedding::new(values)
    }
}

impl From<Embedding> for Vec<f64> {
    fn from(e: Embedding) -> Self {
        e.0
    }
}

/// Output-length bounds for one summarization call.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SummaryParams {
    pub min_tokens: usize,
    pub max_tokens: usize,
}

impl SummaryParams {
    pub fn new(min_tokens: usize, max_tokens: usize) -> Result<Self> {
        let params = SummaryParams {
            min_tokens,
            max_tokens,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        if self.min_tokens == 0 || self.max_tokens == 0 || self.min_tokens > self.max_tokens {
            return Err(Error::InvalidConfig(format!(
                "summary length bounds must satisfy 1 <= min ({}) <= max ({})",
                self.min_tokens, self.max_tokens
            )));
        }
        Ok(())
    }
}

impl Default for SummaryParams {
    fn default() -> Self {
        SummaryParams {
            min_tokens: 20,
            max_tokens: 200,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ActionClass {
    NotActionItem = 0,
    ActionItem = 1,
}

impl ActionClass {
    pub fn from_wire(label: u8) -> Option<Self> {
        match label {
            0 => Some(ActionClass::NotActionItem),
            1 => Some(ActionClass::ActionItem),
            _ => None,
        }
    }

    pub fn wire(self) -> u8 {
        self as u8
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActionLabel {
    pub label: ActionClass,
    pub confidence: f64,
}

impl ActionLabel {
    pub fn is_action_item(&self) -> bool {
        self.label == ActionClass::ActionItem
    }
}

pub trait TokenCounter: Send + Sync {
    /// Zero exactly for empty or whitespace-only text.
    fn count_tokens(&self, text: &str) -> Result<usize>;

    fn count_tokens_batch(&self, texts: &[String]) -> Result<Vec<usize>> {
        texts.iter().map(|t| self.count_tokens(t)).collect()
    }
}

pub trait Embedder: Send + Sync {
    /// One sentence-level vector for the whole text.
    fn embed_text(&self, text: &str) -> Result<Embedding>;

    /// One vector per backend token, in token order.
    fn embed_tokens(&self, text: &str) -> Result<Vec<Embedding>>;
}

pub trait Summarizer: Send + Sync {
    /// Returns a non-empty summary of at most `params.max_tokens` tokens.
    fn summarize(&self, text: &str, params: SummaryParams) -> Result<String>;

    /// Largest input, in tokens, the model accepts.
    fn input_limit(&self) -> usize {
        DEFAULT_INPUT_LIMIT
    }
}

pub trait ActionClassifier: Send + Sync {
    fn classify_action(&self, sentence: &str) -> Result<ActionLabel>;

    fn classify_batch(&self, sentences: &[String]) -> Result<Vec<ActionLabel>> {
        sentences.iter().map(|s| self.classify_action(s)).collect()
    }
}

/// One implementation of each capability. The pipeline is generic over
/// these trait objects only.
#[derive(Clone)]
pub struct Backends {
    pub tokenizer: Arc<dyn TokenCounter>,
    pub embedder: Arc<dyn Embedder>,
    pub summarizer: Arc<dyn Summarizer>,
    pub classifier: Arc<dyn ActionClassifier>,
}

impl fmt::Debug for Backends {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Backends").finish_non_exhaustive()
    }
}

impl Backends {
    /// Uses a single object for all four capabilities.
    pub fn uniform<B>(backend: Arc<B>) -> Self
    where
        B: TokenCounter + Embedder + Summarizer + ActionClassifier + 'static,
    {
        Backends {
            tokenizer: backend.clone(),
            embedder: backend.clone(),
            summarizer: backend.clone(),
            classifier: backend,
        }
    }

    pub fn mock(config: MockConfig, input_limit: usize) -> Self {
        Backends::uniform(Arc::new(MockBackend::new(config, input_limit)))
    }

    pub fn from_config(config: &BackendConfig) -> Result<Self> {
        config.validate()?;
        match config.kind {
            BackendKind::Mock => Ok(Backends::mock(config.mock.clone(), config.input_limit)),
            BackendKind::Remote => Ok(Backends::uniform(Arc::new(RemoteBackend::new(config)?))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    Mock,
    Remote,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BackendConfig {
    pub kind: BackendKind,
    pub endpoint: Option<String>,
    pub timeout_secs: f64,
    pub max_retries: u32,
    /// First retry delay; doubles on each further retry.
    pub backoff_secs: f64,
    pub pool_size: usize,
    pub input_limit: usize,
    pub mock: MockConfig,
}

impl Default for BackendConfig {
    fn default() -> Self {
        BackendConfig {
            kind: BackendKind::Mock,
            endpoint: None,
            timeout_secs: 30.0,
            max_retries: 2,
            backoff_secs: 0.5,
            pool_size: 8,
            input_limit: DEFAULT_INPUT_LIMIT,
            mock: MockConfig::default(),
        }
    }
}

impl BackendConfig {
    pub fn remote(endpoint: impl Into<String>) -> Self {
        BackendConfig {
            kind: BackendKind::Remote,
            endpoint: Some(endpoint.into()),
            ..Default::default()
        }
    }

    pub fn timeout(&self) -> Duration {
        Duration::from_secs_f64(self.timeout_secs)
    }

    pub fn backoff(&self) -> Duration {
        Duration::from_secs_f64(self.backoff_secs)
    }

    pub fn validate(&self) -> Result<()> {
        if self.kind == BackendKind::Remote
            && self.endpoint.as_deref().is_none_or(|e| e.trim().is_empty())
        {
            return Err(Error::InvalidConfig(
                "remote backend requires an endpoint".into(),
            ));
        }
        if !(self.timeout_secs.is_finite() && self.timeout_secs > 0.0) {
            return Err(Error::InvalidConfig("timeout must be positive".into()));
        }
        if !(self.backoff_secs.is_finite() && self.backoff_secs >= 0.0) {
            return Err(Error::InvalidConfig("backoff must be non-negative".into()));
        }
        if self.pool_size == 0 || self.input_limit == 0 {
            return Err(Error::InvalidConfig(
                "pool size and input limit must be positive".into(),
            ));
        }
        self.mock.validate()
    }
}
