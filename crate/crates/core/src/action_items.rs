//! Action-item extraction by neighborhood summarization.
//!
//! Every sentence the classifier marks as an action item is rewritten by
//! summarizing a window around it (by default three sentences before, the
//! sentence itself, and two after), which pulls in the context that
//! pronoun-heavy commitments like "you need to do that" lack.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::backends::{Backends, SummaryParams};
use crate::error::{Error, Result};
use crate::text::truncate_text;
use crate::transcript::split_sentences;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NeighborhoodConfig {
    pub before: usize,
    pub after: usize,
}

impl Default for NeighborhoodConfig {
    fn default() -> Self {
        NeighborhoodConfig {
            before: 3,
            after: 2,
        }
    }
}

impl NeighborhoodConfig {
    pub fn validate(&self) -> Result<()> {
        if self.before + self.after == 0 {
            return Err(Error::InvalidConfig(
                "neighborhood must include at least one sentence besides the trigger".into(),
            ));
        }
        Ok(())
    }
}

/// Half-open sentence window `[start, end)` around `index`.
pub fn neighborhood_window(
    n_sentences: usize,
    index: usize,
    cfg: &NeighborhoodConfig,
) -> Result<(usize, usize)> {
    if index >= n_sentences {
        return Err(Error::IndexOutOfRange {
            index,
            len: n_sentences,
        });
    }
    let start = index.saturating_sub(cfg.before);
    let end = n_sentences.min(index + cfg.after + 1);
    Ok((start, end))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionItem {
    pub sentence_index: usize,
    pub window: (usize, usize),
    pub trigger: String,
    pub text: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionItems {
    /// Rewritten items joined with single spaces, in sentence order.
    pub text: String,
    pub items: Vec<ActionItem>,
}

impl ActionItems {
    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }
}

/// Classifies every sentence of `text` and summarizes the neighborhood of
/// each positive. Neighborhood summaries run on the current rayon pool;
/// results are assembled in sentence order.
pub fn extract_action_items(
    backends: &Backends,
    text: &str,
    cfg: &NeighborhoodConfig,
    params: SummaryParams,
) -> Result<ActionItems> {
    cfg.validate()?;
    params.validate()?;
    let sentences: Vec<String> = split_sentences(text).into_iter().map(|s| s.text).collect();
    if sentences.is_empty() {
        return Err(Error::InvalidInput(
            "action-item extraction needs non-empty text".into(),
        ));
    }
    let labels = backends.classifier.classify_batch(&sentences)?;
    if labels.len() != sentences.len() {
        return Err(Error::InvalidInput(format!(
            "classifier returned {} labels for {} sentences",
            labels.len(),
            sentences.len()
        )));
    }
    let triggers: Vec<usize> = labels
        .iter()
        .enumerate()
        .filter(|(_, l)| l.is_action_item())
        .map(|(i, _)| i)
        .collect();

    let limit = backends.summarizer.input_limit();
    let results: Vec<Result<ActionItem>> = triggers
        .par_iter()
        .map(|&index| {
            let window = neighborhood_window(sentences.len(), index, cfg)?;
            let mut neighborhood = sentences[window.0..window.1].join(" ");
            if backends.tokenizer.count_tokens(&neighborhood)? > limit {
                neighborhood = truncate_text(backends.tokenizer.as_ref(), &neighborhood, limit)?;
            }
            Ok(ActionItem {
                sentence_index: index,
                window,
                trigger: sentences[index].clone(),
                text: backends.summarizer.summarize(&neighborhood, params)?,
            })
        })
        .collect();
    let items = results.into_iter().collect::<Result<Vec<_>>>()?;
    let text = items
        .iter()
        .map(|i| i.text.as_str())
        .collect::<Vec<_>>()
        .join(" ");
    Ok(ActionItems { text, items })
}
