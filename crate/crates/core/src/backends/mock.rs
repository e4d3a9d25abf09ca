//! Deterministic stand-ins for the tokenizer, sentence embedder, summarizer
//! and action-item classifier.
//!
//! Tokens are whitespace-separated words. Embeddings are L2-normalized
//! bags of tokens, either over a fixed vocabulary (plus an optional
//! out-of-vocabulary bucket) or over hashed buckets when no vocabulary is
//! configured.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::{
    ActionClass, ActionClassifier, ActionLabel, Embedder, Embedding, Summarizer, SummaryParams,
    TokenCounter,
};
use crate::error::{Error, Result};
use crate::transcript::split_sentences;

pub const DEFAULT_CUES: &[&str] = &[
    "need to", "will ", "going to", "should ", "by next", "have to",
];

pub const DEFAULT_HASH_DIM: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum MockSummarizerMode {
    /// First sentence, capped at `max_tokens`.
    #[default]
    LeadSentence,
    /// First ceil(k/2) of k tokens, capped at `max_tokens`.
    HalveTokens,
    /// Returns the input unchanged and ignores `max_tokens`. Violates the
    /// summarizer contract; only useful to exercise the depth guard.
    Echo,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MockConfig {
    /// Vocabulary mode when set, hashing mode otherwise.
    pub vocab: Option<Vec<String>>,
    /// Adds one trailing dimension for out-of-vocabulary tokens.
    pub oov_bucket: bool,
    pub hash_dim: usize,
    pub summarizer: MockSummarizerMode,
    pub cues: Vec<String>,
}

impl Default for MockConfig {
    fn default() -> Self {
        MockConfig {
            vocab: None,
            oov_bucket: true,
            hash_dim: DEFAULT_HASH_DIM,
            summarizer: MockSummarizerMode::default(),
            cues: DEFAULT_CUES.iter().map(|c| c.to_string()).collect(),
        }
    }
}

impl MockConfig {
    pub fn with_vocab<I, S>(vocab: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        MockConfig {
            vocab: Some(vocab.into_iter().map(Into::into).collect()),
            ..Default::default()
        }
    }

    pub fn summarizer(mut self, mode: MockSummarizerMode) -> Self {
        self.summarizer = mode;
        self
    }

    pub fn validate(&self) -> Result<()> {
        match &self.vocab {
            Some(vocab) if vocab.is_empty() && !self.oov_bucket => Err(Error::InvalidConfig(
                "mock vocabulary is empty and has no out-of-vocabulary bucket".into(),
            )),
            None if self.hash_dim == 0 => Err(Error::InvalidConfig(
                "mock hash dimension must be positive".into(),
            )),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone)]
enum Space {
    Vocab {
        index: HashMap<String, usize>,
        dim: usize,
        oov: Option<usize>,
    },
    Hashed {
        dim: usize,
    },
}

#[derive(Debug, Clone)]
pub struct MockBackend {
    space: Space,
    mode: MockSummarizerMode,
    cues: Vec<String>,
    input_limit: usize,
}

impl Default for MockBackend {
    fn default() -> Self {
        MockBackend::new(MockConfig::default(), super::DEFAULT_INPUT_LIMIT)
    }
}

impl MockBackend {
    pub fn new(config: MockConfig, input_limit: usize) -> Self {
        let space = match config.vocab {
            Some(vocab) => {
                let mut index = HashMap::new();
                for word in vocab {
                    let next = index.len();
                    index.entry(embedding_key(&word)).or_insert(next);
                }
                let words = index.len();
                let oov = config.oov_bucket.then_some(words);
                Space::Vocab {
                    index,
                    dim: words + usize::from(config.oov_bucket),
                    oov,
                }
            }
            None => Space::Hashed {
                dim: config.hash_dim.max(1),
            },
        };
        MockBackend {
            space,
            mode: config.summarizer,
            cues: config.cues.iter().map(|c| c.to_lowercase()).collect(),
            input_limit,
        }
    }

    pub fn dim(&self) -> usize {
        match &self.space {
            Space::Vocab { dim, .. } | Space::Hashed { dim } => *dim,
        }
    }

    fn bucket(&self, token: &str) -> Option<usize> {
        let key = embedding_key(token);
        match &self.space {
            Space::Vocab { index, oov, .. } => index.get(&key).copied().or(*oov),
            Space::Hashed { dim } => Some((fnv1a(key.as_bytes()) % *dim as u64) as usize),
        }
    }

    fn counts(&self, tokens: &[&str]) -> Vec<f64> {
        let mut values = vec![0.0; self.dim()];
        for token in tokens {
            if let Some(b) = self.bucket(token) {
                values[b] += 1.0;
            }
        }
        values
    }
}

/// Lowercased token with leading/trailing punctuation removed; falls back to
/// the lowercased token when nothing alphanumeric remains.
fn embedding_key(token: &str) -> String {
    let lower = token.to_lowercase();
    let stripped = lower.trim_matches(|c: char| !c.is_alphanumeric());
    if stripped.is_empty() {
        lower
    } else {
        stripped.to_string()
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325, |hash, b| {
        (hash ^ u64::from(*b)).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

fn l2_normalize(mut values: Vec<f64>) -> Vec<f64> {
    let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm > 0.0 {
        for v in &mut values {
            *v /= norm;
        }
    }
    values
}

fn require_text(text: &str, what: &str) -> Result<()> {
    if text.trim().is_empty() {
        return Err(Error::InvalidInput(format!(
            "{what} requires non-empty text"
        )));
    }
    Ok(())
}

impl TokenCounter for MockBackend {
    fn count_tokens(&self, text: &str) -> Result<usize> {
        Ok(text.split_whitespace().count())
    }
}

impl Embedder for MockBackend {
    fn embed_text(&self, text: &str) -> Result<Embedding> {
        require_text(text, "embedding")?;
        let tokens: Vec<&str> = text.split_whitespace().collect();
        Embedding::new(l2_normalize(self.counts(&tokens)))
    }

    fn embed_tokens(&self, text: &str) -> Result<Vec<Embedding>> {
        require_text(text, "embedding")?;
        text.split_whitespace()
            .map(|token| Embedding::new(self.counts(&[token])))
            .collect()
    }
}

impl Summarizer for MockBackend {
    fn summarize(&self, text: &str, params: SummaryParams) -> Result<String> {
        require_text(text, "summarization")?;
        let tokens = self.count_tokens(text)?;
        if tokens > self.input_limit {
            return Err(Error::InputTooLong {
                tokens,
                limit: self.input_limit,
            });
        }
        let words: Vec<&str> = text.split_whitespace().collect();
        let keep = match self.mode {
            MockSummarizerMode::Echo => return Ok(words.join(" ")),
            MockSummarizerMode::LeadSentence => split_sentences(text)
                .first()
                .map_or(words.len(), |s| s.text.split_whitespace().count()),
            MockSummarizerMode::HalveTokens => words.len().div_ceil(2),
        };
        Ok(words[..keep.min(params.max_tokens)].join(" "))
    }

    fn input_limit(&self) -> usize {
        self.input_limit
    }
}

impl ActionClassifier for MockBackend {
    fn classify_action(&self, sentence: &str) -> Result<ActionLabel> {
        require_text(sentence, "classification")?;
        let lower = sentence.to_lowercase();
        let label = if self.cues.iter().any(|cue| lower.contains(cue.as_str())) {
            ActionClass::ActionItem
        } else {
            ActionClass::NotActionItem
        };
        Ok(ActionLabel {
            label,
            confidence: 1.0,
        })
    }
}
