//! Blocking JSON-over-HTTP client for an inference server.
//!
//! Endpoints (all POST):
//!
//! | path              | request                                   | response                          |
//! |-------------------|-------------------------------------------|-----------------------------------|
//! | `/v1/count_tokens`| `{"texts":[s]}`                           | `{"counts":[n]}`                  |
//! | `/v1/embed`       | `{"texts":[s],"granularity":"text"}`      | `{"vectors":[[f]]}`               |
//! | `/v1/embed`       | `{"texts":[s],"granularity":"tokens"}`    | `{"vectors":[[[f]]]}`             |
//! | `/v1/summarize`   | `{"text":s,"min_tokens":n,"max_tokens":n}`| `{"summary":s}`                   |
//! | `/v1/classify`    | `{"sentences":[s]}`                       | `{"labels":[0|1],"scores":[f]}`   |
//!
//! A non-2xx status, a transport error, or a body that does not match the
//! response schema counts as a failed attempt. After `max_retries` retries
//! the call fails with `BackendUnavailable`.

use std::sync::OnceLock;
use std::thread;
use std::time::Duration;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::{
    ActionClass, ActionClassifier, ActionLabel, BackendConfig, Embedder, Embedding, Summarizer,
    SummaryParams, TokenCounter,
};
use crate::error::{Error, Result};

pub const COUNT_TOKENS_PATH: &str = "/v1/count_tokens";
pub const EMBED_PATH: &str = "/v1/embed";
pub const SUMMARIZE_PATH: &str = "/v1/summarize";
pub const CLASSIFY_PATH: &str = "/v1/classify";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountTokensRequest {
    pub texts: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountTokensResponse {
    pub counts: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Granularity {
    Text,
    Tokens,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbedRequest {
    pub texts: Vec<String>,
    pub granularity: Granularity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbedTextResponse {
    pub vectors: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbedTokensResponse {
    pub vectors: Vec<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummarizeRequest {
    pub text: String,
    pub min_tokens: usize,
    pub max_tokens: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummarizeResponse {
    pub summary: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifyRequest {
    pub sentences: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifyResponse {
    pub labels: Vec<u8>,
    pub scores: Vec<f64>,
}

#[derive(Debug)]
pub struct RemoteBackend {
    agent: ureq::Agent,
    endpoint: String,
    max_retries: u32,
    backoff: Duration,
    input_limit: usize,
    dim: OnceLock<usize>,
}

impl RemoteBackend {
    pub fn new(config: &BackendConfig) -> Result<Self> {
        config.validate()?;
        let endpoint = config
            .endpoint
            .as_deref()
            .ok_or_else(|| Error::InvalidConfig("remote backend requires an endpoint".into()))?
            .trim()
            .trim_end_matches('/')
            .to_string();
        let agent = ureq::AgentBuilder::new()
            .timeout(config.timeout())
            .max_idle_connections(config.pool_size)
            .max_idle_connections_per_host(config.pool_size)
            .build();
        Ok(RemoteBackend {
            agent,
            endpoint,
            max_retries: config.max_retries,
            backoff: config.backoff(),
            input_limit: config.input_limit,
            dim: OnceLock::new(),
        })
    }

    pub fn endpoint(&self) -> &str {
        &self.endpoint
    }

    fn post<Req, Resp>(
        &self,
        path: &str,
        request: &Req,
        check: impl Fn(&Resp) -> Result<(), String>,
    ) -> Result<Resp>
    where
        Req: Serialize,
        Resp: DeserializeOwned,
    {
        let body = serde_json::to_string(request)
            .map_err(|e| Error::InvalidInput(format!("unserializable request: {e}")))?;
        let url = format!("{}{}", self.endpoint, path);
        let attempts = self.max_retries + 1;
        let mut reason = String::new();
        for attempt in 0..attempts {
            if attempt > 0 {
                thread::sleep(self.backoff * 2u32.saturating_pow(attempt - 1));
            }
            match self.attempt(&url, &body, &check) {
                Ok(resp) => return Ok(resp),
                Err(e) => reason = e,
            }
        }
        Err(Error::BackendUnavailable {
            endpoint: url,
            attempts,
            reason,
        })
    }

    fn attempt<Resp: DeserializeOwned>(
        &self,
        url: &str,
        body: &str,
        check: &impl Fn(&Resp) -> Result<(), String>,
    ) -> Result<Resp, String> {
        let response = self
            .agent
            .post(url)
            .set("Content-Type", "application/json")
            .send_string(body)
            .map_err(|e| match e {
                ureq::Error::Status(code, _) => format!("HTTP status {code}"),
                ureq::Error::Transport(t) => format!("transport error: {t}"),
            })?;
        let text = response
            .into_string()
            .map_err(|e| format!("unreadable body: {e}"))?;
        let parsed: Resp =
            serde_json::from_str(&text).map_err(|e| format!("schema mismatch: {e}"))?;
        check(&parsed)?;
        Ok(parsed)
    }

    fn check_vector(&self, v: &[f64]) -> Result<(), String> {
        if v.is_empty() || v.iter().any(|x| !x.is_finite()) {
            return Err("vectors must be non-empty and finite".into());
        }
        let dim = *self.dim.get_or_init(|| v.len());
        if dim != v.len() {
            return Err(format!("vector dimension {} differs from {dim}", v.len()));
        }
        Ok(())
    }
}

fn require_text(text: &str, what: &str) -> Result<()> {
    if text.trim().is_empty() {
        return Err(Error::InvalidInput(format!(
            "{what} requires non-empty text"
        )));
    }
    Ok(())
}

fn expect_len(got: usize, want: usize, field: &str) -> Result<(), String> {
    if got != want {
        return Err(format!("expected {want} {field}, got {got}"));
    }
    Ok(())
}

impl TokenCounter for RemoteBackend {
    fn count_tokens(&self, text: &str) -> Result<usize> {
        Ok(self.count_tokens_batch(&[text.to_string()])?[0])
    }

    fn count_tokens_batch(&self, texts: &[String]) -> Result<Vec<usize>> {
        if texts.is_empty() {
            return Ok(Vec::new());
        }
        let request = CountTokensRequest {
            texts: texts.to_vec(),
        };
        let response: CountTokensResponse =
            self.post(COUNT_TOKENS_PATH, &request, |r: &CountTokensResponse| {
                expect_len(r.counts.len(), texts.len(), "counts")
            })?;
        Ok(response.counts)
    }
}

impl Embedder for RemoteBackend {
    fn embed_text(&self, text: &str) -> Result<Embedding> {
        require_text(text, "embedding")?;
        let request = EmbedRequest {
            texts: vec![text.to_string()],
            granularity: Granularity::Text,
        };
        let response: EmbedTextResponse =
            self.post(EMBED_PATH, &request, |r: &EmbedTextResponse| {
                expect_len(r.vectors.len(), 1, "vectors")?;
                self.check_vector(&r.vectors[0])
            })?;
        let vector = response.vectors.into_iter().next().unwrap_or_default();
        Embedding::new(vector)
    }

    fn embed_tokens(&self, text: &str) -> Result<Vec<Embedding>> {
        require_text(text, "embedding")?;
        let request = EmbedRequest {
            texts: vec![text.to_string()],
            granularity: Granularity::Tokens,
        };
        let response: EmbedTokensResponse =
            self.post(EMBED_PATH, &request, |r: &EmbedTokensResponse| {
                expect_len(r.vectors.len(), 1, "token lists")?;
                if r.vectors[0].is_empty() {
                    return Err("empty token vector list".into());
                }
                r.vectors[0].iter().try_for_each(|v| self.check_vector(v))
            })?;
        response
            .vectors
            .into_iter()
            .next()
            .unwrap_or_default()
            .into_iter()
            .map(Embedding::new)
            .collect()
    }
}

impl Summarizer for RemoteBackend {
    fn summarize(&self, text: &str, params: SummaryParams) -> Result<String> {
        require_text(text, "summarization")?;
        params.validate()?;
        let request = SummarizeRequest {
            text: text.to_string(),
            min_tokens: params.min_tokens,
            max_tokens: params.max_tokens,
        };
        let response: SummarizeResponse =
            self.post(SUMMARIZE_PATH, &request, |r: &SummarizeResponse| {
                if r.summary.trim().is_empty() {
                    return Err("empty summary".into());
                }
                Ok(())
            })?;
        Ok(response.summary)
    }

    fn input_limit(&self) -> usize {
        self.input_limit
    }
}

impl ActionClassifier for RemoteBackend {
    fn classify_action(&self, sentence: &str) -> Result<ActionLabel> {
        Ok(self.classify_batch(&[sentence.to_string()])?[0])
    }

    fn classify_batch(&self, sentences: &[String]) -> Result<Vec<ActionLabel>> {
        if sentences.is_empty() {
            return Ok(Vec::new());
        }
        for s in sentences {
            require_text(s, "classification")?;
        }
        let request = ClassifyRequest {
            sentences: sentences.to_vec(),
        };
        let response: ClassifyResponse =
            self.post(CLASSIFY_PATH, &request, |r: &ClassifyResponse| {
                expect_len(r.labels.len(), sentences.len(), "labels")?;
                expect_len(r.scores.len(), sentences.len(), "scores")?;
                if r.labels.iter().any(|l| *l > 1) {
                    return Err("labels must be 0 or 1".into());
                }
                if r.scores.iter().any(|s| !(0.0..=1.0).contains(s)) {
                    return Err("scores must lie in [0, 1]".into());
                }
                Ok(())
            })?;
        Ok(response
            .labels
            .iter()
            .zip(&response.scores)
            .map(|(label, score)| ActionLabel {
                label: ActionClass::from_wire(*label).unwrap_or(ActionClass::NotActionItem),
                confidence: *score,
            })
            .collect())
    }
}
