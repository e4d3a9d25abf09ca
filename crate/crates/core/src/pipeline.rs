//! Recursive divide-and-conquer summarization.
//!
//! One pass segments its input into chunks, summarizes every chunk in
//! parallel, and joins the sectional summaries in chunk order. On the first
//! pass each chunk's general summary is enriched with its action items and
//! summarized again. If the joined summaries still exceed `max_tokens` the
//! next pass treats them as a new document, segmented by sentence;
//! otherwise one last summarization produces the result.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::action_items::{extract_action_items, NeighborhoodConfig};
use crate::backends::{Backends, SummaryParams};
use crate::error::{Error, Result};
use crate::segmentation::{segment_units, Chunk, SegmenterConfig, DEFAULT_MAX_TOKENS};
use crate::text::{normalize_whitespace, truncate_text};
use crate::transcript::{parse_transcript, split_sentences, Transcript, TranscriptFormat};

pub const DEFAULT_MAX_DEPTH: usize = 8;

/// Logical cores, capped at 8.
pub fn default_parallelism() -> usize {
    std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1)
        .min(8)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub segmenter: SegmenterConfig,
    pub neighborhood: NeighborhoodConfig,
    pub summary_params: SummaryParams,
    pub include_action_items: bool,
    /// Input limit of every summarization call; overrides
    /// `segmenter.max_tokens` inside the pipeline.
    pub max_tokens: usize,
    pub parallelism: usize,
    pub max_depth: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            segmenter: SegmenterConfig::default(),
            neighborhood: NeighborhoodConfig::default(),
            summary_params: SummaryParams::default(),
            include_action_items: true,
            max_tokens: DEFAULT_MAX_TOKENS,
            parallelism: default_parallelism(),
            max_depth: DEFAULT_MAX_DEPTH,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        self.segmenter.validate()?;
        self.neighborhood.validate()?;
        self.summary_params.validate()?;
        if self.max_tokens == 0 || self.parallelism == 0 || self.max_depth == 0 {
            return Err(Error::InvalidConfig(
                "max_tokens, parallelism and max_depth must be positive".into(),
            ));
        }
        if self.summary_params.max_tokens >= self.max_tokens {
            return Err(Error::InvalidConfig(format!(
                "summary length ({}) must be below the input limit ({})",
                self.summary_params.max_tokens, self.max_tokens
            )));
        }
        Ok(())
    }

    fn segmenter_for_pass(&self) -> SegmenterConfig {
        SegmenterConfig {
            max_tokens: self.max_tokens,
            ..self.segmenter
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UnitKind {
    Turns,
    Sentences,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PassRecord {
    pub depth: usize,
    pub units: UnitKind,
    pub unit_count: usize,
    pub chunk_count: usize,
    pub chunk_tokens: Vec<usize>,
    pub action_items: Vec<usize>,
    pub summary_tokens: Vec<usize>,
    /// Tokens in the joined sectional summaries.
    pub joined_tokens: usize,
    pub elapsed_ms: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PipelineTrace {
    pub passes: Vec<PassRecord>,
    pub final_tokens: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineOutput {
    pub summary: String,
    pub trace: PipelineTrace,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SectionalSummary {
    pub text: String,
    pub action_items: usize,
}

/// Immutable after construction; safe to share across threads.
pub struct Pipeline {
    backends: Backends,
    cfg: PipelineConfig,
    pool: rayon::ThreadPool,
}

impl std::fmt::Debug for Pipeline {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Pipeline")
            .field("cfg", &self.cfg)
            .finish_non_exhaustive()
    }
}

impl Pipeline {
    pub fn new(backends: Backends, cfg: PipelineConfig) -> Result<Self> {
        cfg.validate()?;
        let limit = backends.summarizer.input_limit();
        if cfg.max_tokens > limit {
            return Err(Error::InvalidConfig(format!(
                "max_tokens ({}) exceeds the summarizer input limit ({limit})",
                cfg.max_tokens
            )));
        }
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.parallelism)
            .thread_name(|i| format!("minuted-worker-{i}"))
            .build()
            .map_err(|e| Error::InvalidConfig(format!("cannot start worker pool: {e}")))?;
        Ok(Pipeline {
            backends,
            cfg,
            pool,
        })
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.cfg
    }

    pub fn backends(&self) -> &Backends {
        &self.backends
    }

    pub fn truncate_text(&self, text: &str, max_tokens: usize) -> Result<String> {
        truncate_text(self.backends.tokenizer.as_ref(), text, max_tokens)
    }

    fn summarize(&self, text: &str) -> Result<String> {
        self.backends
            .summarizer
            .summarize(text, self.cfg.summary_params)
    }

    fn count(&self, text: &str) -> Result<usize> {
        self.backends.tokenizer.count_tokens(text)
    }

    /// Summary of one chunk. With `first` set and action items enabled, the
    /// general summary and the chunk's action items are joined, truncated to
    /// `max_tokens` if needed, and summarized again.
    pub fn sectional_summary(&self, chunk: &Chunk, first: bool) -> Result<SectionalSummary> {
        if chunk.token_count > self.cfg.max_tokens {
            return Err(Error::InputTooLong {
                tokens: chunk.token_count,
                limit: self.cfg.max_tokens,
            });
        }
        let general = self.summarize(&chunk.text)?;
        if !(first && self.cfg.include_action_items) {
            return Ok(SectionalSummary {
                text: general,
                action_items: 0,
            });
        }
        let actions = extract_action_items(
            &self.backends,
            &chunk.text,
            &self.cfg.neighborhood,
            self.cfg.summary_params,
        )?;
        let mut combined = if actions.is_empty() {
            general
        } else {
            format!("{general} {}", actions.text)
        };
        if self.count(&combined)? > self.cfg.max_tokens {
            combined = self.truncate_text(&combined, self.cfg.max_tokens)?;
        }
        Ok(SectionalSummary {
            text: self.summarize(&combined)?,
            action_items: actions.len(),
        })
    }

    pub fn summarize_transcript(&self, transcript: &Transcript) -> Result<PipelineOutput> {
        self.run(transcript.units())
    }

    /// Parses `text` as a plain `Speaker: text` transcript first.
    pub fn action_item_driven_summary(&self, text: &str) -> Result<PipelineOutput> {
        let transcript = parse_transcript(text, TranscriptFormat::Plain)?;
        self.summarize_transcript(&transcript)
    }

    fn run(&self, turns: Vec<String>) -> Result<PipelineOutput> {
        let mut trace = PipelineTrace::default();
        let mut units = turns;
        let mut kind = UnitKind::Turns;
        let segmenter = self.cfg.segmenter_for_pass();

        for depth in 0..=self.cfg.max_depth {
            let started = Instant::now();
            let first = depth == 0;
            let chunks = segment_units(&self.backends, &units, &segmenter)?;
            let results: Vec<Result<SectionalSummary>> = self.pool.install(|| {
                chunks
                    .par_iter()
                    .map(|chunk| self.sectional_summary(chunk, first))
                    .collect()
            });
            let sections = results.into_iter().collect::<Result<Vec<_>>>()?;
            let joined = sections
                .iter()
                .map(|s| s.text.as_str())
                .collect::<Vec<_>>()
                .join(" ");
            let joined_tokens = self.count(&joined)?;
            trace.passes.push(PassRecord {
                depth,
                units: kind,
                unit_count: units.len(),
                chunk_count: chunks.len(),
                chunk_tokens: chunks.iter().map(|c| c.token_count).collect(),
                action_items: sections.iter().map(|s| s.action_items).collect(),
                summary_tokens: sections
                    .iter()
                    .map(|s| self.count(&s.text))
                    .collect::<Result<_>>()?,
                joined_tokens,
                elapsed_ms: started.elapsed().as_secs_f64() * 1e3,
            });

            if joined_tokens <= self.cfg.max_tokens {
                let summary = self.summarize(&joined)?;
                trace.final_tokens = self.count(&summary)?;
                return Ok(PipelineOutput { summary, trace });
            }
            units = split_sentences(&normalize_whitespace(&joined))
                .into_iter()
                .map(|s| s.text)
                .collect();
            kind = UnitKind::Sentences;
        }
        Err(Error::DepthExceeded {
            max_depth: self.cfg.max_depth,
        })
    }
}
