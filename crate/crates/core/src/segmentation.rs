//! Topic segmentation of an ordered list of text units into chunks that fit
//! the summarizer's input limit.
//!
//! Four strategies are available:
//!
//! * `linear`: fixed token windows over the joined text, ignoring unit
//!   boundaries (the baseline).
//! * `chunked-linear`: greedily packs whole units while the chunk stays
//!   within `max_tokens`.
//! * `simple-cosine`: like chunked-linear, but also starts a new chunk when
//!   the embedding of a unit is not more similar than the threshold to the
//!   embedding of the previous unit.
//! * `complex-cosine`: compares the next unit against the embedding of the
//!   whole current chunk, recomputed after every growth step, which keeps
//!   short off-topic units from opening spurious topics.
//!
//! A unit that alone exceeds `max_tokens` is split at sentence boundaries,
//! and a sentence that still exceeds it is cut into token windows. The
//! resulting pieces all carry the unit's range.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::backends::{Backends, Embedder, Embedding, TokenCounter};
use crate::error::{Error, Result};
use crate::text::{normalize_whitespace, split_into_token_windows, split_token_prefix};
use crate::transcript::split_sentences;

pub const DEFAULT_MAX_TOKENS: usize = 1024;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Chunk {
    pub text: String,
    pub token_count: usize,
    /// Half-open range into the source units (words for `linear`).
    pub unit_range: (usize, usize),
}

#[derive(
    Debug,
    Clone,
    Copy,
    PartialEq,
    Eq,
    PartialOrd,
    Ord,
    Hash,
    Serialize,
    Deserialize,
    clap::ValueEnum,
)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    Linear,
    ChunkedLinear,
    SimpleCosine,
    ComplexCosine,
}

impl Strategy {
    pub const ALL: [Strategy; 4] = [
        Strategy::Linear,
        Strategy::ChunkedLinear,
        Strategy::SimpleCosine,
        Strategy::ComplexCosine,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::Linear => "linear",
            Strategy::ChunkedLinear => "chunked-linear",
            Strategy::SimpleCosine => "simple-cosine",
            Strategy::ComplexCosine => "complex-cosine",
        }
    }

    pub fn title(self) -> &'static str {
        match self {
            Strategy::Linear => "Linear Segmentation",
            Strategy::ChunkedLinear => "Chunked Linear Segmentation",
            Strategy::SimpleCosine => "Simple Cosine Segmentation",
            Strategy::ComplexCosine => "Complex Cosine Segmentation",
        }
    }

    /// Whether chunks are made of whole units.
    pub fn respects_units(self) -> bool {
        self != Strategy::Linear
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Strategy::ALL
            .into_iter()
            .find(|st| st.as_str() == s)
            .ok_or_else(|| Error::InvalidInput(format!("unknown segmentation strategy `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SegmenterConfig {
    pub strategy: Strategy,
    pub similarity_threshold: f64,
    pub max_tokens: usize,
}

impl Default for SegmenterConfig {
    fn default() -> Self {
        SegmenterConfig {
            strategy: Strategy::ChunkedLinear,
            similarity_threshold: 0.0,
            max_tokens: DEFAULT_MAX_TOKENS,
        }
    }
}

impl SegmenterConfig {
    pub fn new(strategy: Strategy) -> Self {
        SegmenterConfig {
            strategy,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_tokens == 0 {
            return Err(Error::InvalidConfig("max_tokens must be at least 1".into()));
        }
        if !self.similarity_threshold.is_finite() {
            return Err(Error::InvalidConfig(
                "similarity threshold must be finite".into(),
            ));
        }
        Ok(())
    }
}

pub fn cosine_similarity(a: &Embedding, b: &Embedding) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            left: a.dim(),
            right: b.dim(),
        });
    }
    let (na, nb) = (a.norm(), b.norm());
    if na == 0.0 || nb == 0.0 {
        return Err(Error::ZeroVector);
    }
    let dot: f64 = a.values().iter().zip(b.values()).map(|(x, y)| x * y).sum();
    Ok((dot / (na * nb)).clamp(-1.0, 1.0))
}

/// Fixed-size token windows over `text`. Every chunk but the last holds
/// exactly `max_tokens` tokens for a tokenizer that maps words to tokens
/// one to one.
pub fn linear_segment(
    tokenizer: &dyn TokenCounter,
    text: &str,
    max_tokens: usize,
) -> Result<Vec<Chunk>> {
    check_max(max_tokens)?;
    let mut rest = normalize_whitespace(text);
    if rest.is_empty() {
        return Err(Error::InvalidInput("cannot segment empty text".into()));
    }
    let mut chunks = Vec::new();
    let mut word = 0;
    while !rest.is_empty() {
        let (head, tail) = split_token_prefix(tokenizer, &rest, max_tokens)?;
        let words = head.split_whitespace().count();
        chunks.push(Chunk {
            token_count: tokenizer.count_tokens(&head)?,
            text: head,
            unit_range: (word, word + words),
        });
        word += words;
        rest = tail;
    }
    Ok(chunks)
}

/// Greedy packing of whole units up to `max_tokens`.
pub fn chunked_linear_segment(
    tokenizer: &dyn TokenCounter,
    units: &[String],
    max_tokens: usize,
) -> Result<Vec<Chunk>> {
    check_max(max_tokens)?;
    let units = normalize_units(units)?;
    pack(tokenizer, &units, max_tokens, true, |_, _| Ok(true))
}

pub fn simple_cosine_segment(
    backends: &Backends,
    units: &[String],
    cfg: &SegmenterConfig,
) -> Result<Vec<Chunk>> {
    cfg.validate()?;
    let units = normalize_units(units)?;
    let embedder = backends.embedder.as_ref();
    let mut cache: Vec<Option<Embedding>> = vec![None; units.len()];
    let mut embed_unit = |i: usize| -> Result<Embedding> {
        if let Some(e) = &cache[i] {
            return Ok(e.clone());
        }
        let e = embedder.embed_text(&units[i])?;
        cache[i] = Some(e.clone());
        Ok(e)
    };
    pack(
        backends.tokenizer.as_ref(),
        &units,
        cfg.max_tokens,
        true,
        |_, i| {
            let previous = embed_unit(i - 1)?;
            let next = embed_unit(i)?;
            Ok(cosine_similarity(&previous, &next)? > cfg.similarity_threshold)
        },
    )
}

pub fn complex_cosine_segment(
    backends: &Backends,
    units: &[String],
    cfg: &SegmenterConfig,
) -> Result<Vec<Chunk>> {
    cfg.validate()?;
    let units = normalize_units(units)?;
    let mut memo = EmbeddingMemo::new(backends.embedder.as_ref());
    pack(
        backends.tokenizer.as_ref(),
        &units,
        cfg.max_tokens,
        true,
        |chunk_text, i| {
            let chunk = memo.embed(chunk_text)?;
            let next = memo.embed(&units[i])?;
            Ok(cosine_similarity(&chunk, &next)? > cfg.similarity_threshold)
        },
    )
}

/// Dispatches on `cfg.strategy`. `linear` joins the units and cuts the
/// result into token windows.
pub fn segment_units(
    backends: &Backends,
    units: &[String],
    cfg: &SegmenterConfig,
) -> Result<Vec<Chunk>> {
    cfg.validate()?;
    match cfg.strategy {
        Strategy::Linear => {
            let joined = normalize_units(units)?.join(" ");
            linear_segment(backends.tokenizer.as_ref(), &joined, cfg.max_tokens)
        }
        Strategy::ChunkedLinear => {
            chunked_linear_segment(backends.tokenizer.as_ref(), units, cfg.max_tokens)
        }
        Strategy::SimpleCosine => simple_cosine_segment(backends, units, cfg),
        Strategy::ComplexCosine => complex_cosine_segment(backends, units, cfg),
    }
}

/// Checks that `chunks` partition `units` in order: their texts rejoin to
/// the units, every chunk fits `max_tokens`, and (for the unit-respecting
/// strategies) unit ranges tile `0..units.len()`, with oversize pieces
/// repeating the range of the unit they came from.
pub fn verify_chunks(
    tokenizer: &dyn TokenCounter,
    units: &[String],
    chunks: &[Chunk],
    strategy: Strategy,
    max_tokens: usize,
) -> Result<()> {
    let fail = |msg: String| {
        Err(Error::InvalidInput(format!(
            "segmentation check failed: {msg}"
        )))
    };
    let units = normalize_units(units)?;
    let joined_units = units.join(" ");
    let joined_chunks = chunks
        .iter()
        .map(|c| c.text.as_str())
        .collect::<Vec<_>>()
        .join(" ");
    if joined_units != joined_chunks {
        return fail("chunks do not rejoin to the input".into());
    }
    for (k, c) in chunks.iter().enumerate() {
        let tokens = tokenizer.count_tokens(&c.text)?;
        if tokens != c.token_count {
            return fail(format!(
                "chunk {k} reports {} tokens, has {tokens}",
                c.token_count
            ));
        }
        if tokens > max_tokens {
            return fail(format!(
                "chunk {k} has {tokens} tokens, limit is {max_tokens}"
            ));
        }
    }
    let len = if strategy.respects_units() {
        units.len()
    } else {
        joined_units.split_whitespace().count()
    };
    let mut expected_start = 0;
    let mut previous: Option<(usize, usize)> = None;
    for (k, c) in chunks.iter().enumerate() {
        let (s, e) = c.unit_range;
        let repeat = strategy.respects_units() && previous == Some(c.unit_range) && e == s + 1;
        if !repeat && (s != expected_start || e <= s) {
            return fail(format!(
                "chunk {k} has range {s}..{e}, expected start {expected_start}"
            ));
        }
        expected_start = e;
        previous = Some(c.unit_range);
    }
    if expected_start != len {
        return fail(format!(
            "ranges end at {expected_start}, input has {len} units"
        ));
    }
    Ok(())
}

/// Reuses the embedding of identical full texts within one segmentation.
struct EmbeddingMemo<'a> {
    embedder: &'a dyn Embedder,
    cache: HashMap<String, Embedding>,
}

impl<'a> EmbeddingMemo<'a> {
    fn new(embedder: &'a dyn Embedder) -> Self {
        EmbeddingMemo {
            embedder,
            cache: HashMap::new(),
        }
    }

    fn embed(&mut self, text: &str) -> Result<Embedding> {
        if let Some(e) = self.cache.get(text) {
            return Ok(e.clone());
        }
        let e = self.embedder.embed_text(text)?;
        self.cache.insert(text.to_string(), e.clone());
        Ok(e)
    }
}

fn check_max(max_tokens: usize) -> Result<()> {
    if max_tokens == 0 {
        return Err(Error::InvalidConfig("max_tokens must be at least 1".into()));
    }
    Ok(())
}

fn normalize_units(units: &[String]) -> Result<Vec<String>> {
    if units.is_empty() {
        return Err(Error::InvalidInput(
            "cannot segment an empty unit list".into(),
        ));
    }
    units
        .iter()
        .enumerate()
        .map(|(i, u)| {
            let n = normalize_whitespace(u);
            if n.is_empty() {
                Err(Error::InvalidInput(format!("unit {i} is empty")))
            } else {
                Ok(n)
            }
        })
        .collect()
}

struct Open {
    text: String,
    tokens: usize,
    start: usize,
}

/// Shared growth loop. `joins(chunk_text, i)` decides whether unit `i` may
/// extend the open chunk; it is consulted only when the grown chunk would
/// still fit in `max_tokens`.
fn pack<F>(
    tokenizer: &dyn TokenCounter,
    units: &[String],
    max_tokens: usize,
    split_oversize_by_sentence: bool,
    mut joins: F,
) -> Result<Vec<Chunk>>
where
    F: FnMut(&str, usize) -> Result<bool>,
{
    let mut chunks = Vec::new();
    let mut open: Option<Open> = None;
    let close = |open: Open, i: usize| Chunk {
        text: open.text,
        token_count: open.tokens,
        unit_range: (open.start, i),
    };

    for (i, unit) in units.iter().enumerate() {
        let unit_tokens = tokenizer.count_tokens(unit)?;
        if unit_tokens > max_tokens {
            if let Some(o) = open.take() {
                chunks.push(close(o, i));
            }
            for piece in oversize_pieces(tokenizer, unit, max_tokens, split_oversize_by_sentence)? {
                chunks.push(Chunk {
                    token_count: tokenizer.count_tokens(&piece)?,
                    text: piece,
                    unit_range: (i, i + 1),
                });
            }
            continue;
        }
        open = Some(match open.take() {
            None => Open {
                text: unit.clone(),
                tokens: unit_tokens,
                start: i,
            },
            Some(o) => {
                let grown = format!("{} {}", o.text, unit);
                let grown_tokens = tokenizer.count_tokens(&grown)?;
                if grown_tokens <= max_tokens && joins(&o.text, i)? {
                    Open {
                        text: grown,
                        tokens: grown_tokens,
                        start: o.start,
                    }
                } else {
                    chunks.push(close(o, i));
                    Open {
                        text: unit.clone(),
                        tokens: unit_tokens,
                        start: i,
                    }
                }
            }
        });
    }
    if let Some(o) = open {
        chunks.push(close(o, units.len()));
    }
    Ok(chunks)
}

fn oversize_pieces(
    tokenizer: &dyn TokenCounter,
    unit: &str,
    max_tokens: usize,
    by_sentence: bool,
) -> Result<Vec<String>> {
    if !by_sentence {
        return split_into_token_windows(tokenizer, unit, max_tokens);
    }
    let sentences: Vec<String> = split_sentences(unit).into_iter().map(|s| s.text).collect();
    Ok(
        pack(tokenizer, &sentences, max_tokens, false, |_, _| Ok(true))?
            .into_iter()
            .map(|c| c.text)
            .collect(),
    )
}
