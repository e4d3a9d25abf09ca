//! ROUGE-1/2/L and BERTScore, per document and averaged over a corpus.
//!
//! ROUGE tokens are lowercased alphanumeric runs with no stemming or stopword
//! removal; F1 uses beta = 1. BERTScore greedily matches token embeddings by
//! cosine similarity, without idf weighting, and is only rescaled when a
//! baseline is supplied.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::backends::{Embedder, Embedding};
use crate::error::{Error, Result};
use crate::segmentation::Strategy;

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ScoreTriple {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl ScoreTriple {
    pub fn from_precision_recall(precision: f64, recall: f64) -> Self {
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        ScoreTriple {
            precision,
            recall,
            f1,
        }
    }

    fn rescale(self, baseline: f64) -> Self {
        let r = |x: f64| (x - baseline) / (1.0 - baseline);
        ScoreTriple {
            precision: r(self.precision),
            recall: r(self.recall),
            f1: r(self.f1),
        }
    }
}

pub fn rouge_tokens(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

fn ngram_counts(tokens: &[String], n: usize) -> HashMap<&[String], usize> {
    let mut counts = HashMap::new();
    if tokens.len() >= n {
        for gram in tokens.windows(n) {
            *counts.entry(gram).or_insert(0) += 1;
        }
    }
    counts
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

pub fn rouge_n(candidate: &str, reference: &str, n: usize) -> Result<ScoreTriple> {
    if n == 0 {
        return Err(Error::InvalidInput("ROUGE-N needs n >= 1".into()));
    }
    let reference = rouge_tokens(reference);
    if reference.is_empty() {
        return Err(Error::EmptyReference);
    }
    let candidate = rouge_tokens(candidate);
    let cand = ngram_counts(&candidate, n);
    let refs = ngram_counts(&reference, n);
    let matches: usize = cand
        .iter()
        .map(|(gram, c)| (*c).min(refs.get(gram).copied().unwrap_or(0)))
        .sum();
    let cand_total = candidate.len().saturating_sub(n - 1);
    let ref_total = reference.len().saturating_sub(n - 1);
    Ok(ScoreTriple::from_precision_recall(
        ratio(matches, cand_total),
        ratio(matches, ref_total),
    ))
}

/// Length of the longest common subsequence, in O(|a|·|b|) time and
/// O(|b|) space.
pub fn lcs_len<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let mut row = vec![0usize; b.len() + 1];
    for x in a {
        let mut diag = 0;
        for (j, y) in b.iter().enumerate() {
            let up = row[j + 1];
            row[j + 1] = if x == y { diag + 1 } else { up.max(row[j]) };
            diag = up;
        }
    }
    row[b.len()]
}

pub fn rouge_l(candidate: &str, reference: &str) -> Result<ScoreTriple> {
    let reference = rouge_tokens(reference);
    if reference.is_empty() {
        return Err(Error::EmptyReference);
    }
    let candidate = rouge_tokens(candidate);
    let lcs = lcs_len(&candidate, &reference);
    Ok(ScoreTriple::from_precision_recall(
        ratio(lcs, candidate.len()),
        ratio(lcs, reference.len()),
    ))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BertScoreOptions {
    /// When set, scores are mapped through `(x - b) / (1 - b)`.
    pub baseline: Option<f64>,
}

impl BertScoreOptions {
    pub fn validate(&self) -> Result<()> {
        match self.baseline {
            Some(b) if !(b.is_finite() && b < 1.0) => Err(Error::InvalidConfig(
                "BERTScore baseline must be finite and below 1".into(),
            )),
            _ => Ok(()),
        }
    }
}

/// Cosine similarity that treats a zero vector as dissimilar to everything.
fn match_similarity(a: &Embedding, b: &Embedding) -> Result<f64> {
    match crate::segmentation::cosine_similarity(a, b) {
        Err(Error::ZeroVector) => Ok(0.0),
        other => other,
    }
}

pub fn bert_score(
    embedder: &dyn Embedder,
    candidate: &str,
    reference: &str,
) -> Result<ScoreTriple> {
    bert_score_with(embedder, candidate, reference, &BertScoreOptions::default())
}

pub fn bert_score_with(
    embedder: &dyn Embedder,
    candidate: &str,
    reference: &str,
    options: &BertScoreOptions,
) -> Result<ScoreTriple> {
    options.validate()?;
    if candidate.trim().is_empty() {
        return Err(Error::InvalidInput(
            "BERTScore needs a non-empty candidate".into(),
        ));
    }
    if reference.trim().is_empty() {
        return Err(Error::EmptyReference);
    }
    let cand = embedder.embed_tokens(candidate)?;
    let refs = embedder.embed_tokens(reference)?;
    if cand.is_empty() || refs.is_empty() {
        return Err(Error::InvalidInput(
            "embedder returned no token vectors".into(),
        ));
    }
    let mut sim = vec![vec![0.0; refs.len()]; cand.len()];
    for (i, c) in cand.iter().enumerate() {
        for (j, r) in refs.iter().enumerate() {
            sim[i][j] = match_similarity(c, r)?;
        }
    }
    let precision = sim
        .iter()
        .map(|row| row.iter().copied().fold(f64::NEG_INFINITY, f64::max))
        .sum::<f64>()
        / cand.len() as f64;
    let recall = (0..refs.len())
        .map(|j| {
            sim.iter()
                .map(|row| row[j])
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .sum::<f64>()
        / refs.len() as f64;
    let triple = ScoreTriple::from_precision_recall(precision, recall);
    Ok(match options.baseline {
        Some(b) => triple.rescale(b),
        None => triple,
    })
}

/// Which arm of the segmentation × action-items grid produced a set of
/// candidates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ConfigDescriptor {
    pub strategy: Strategy,
    pub action_items: bool,
}

impl ConfigDescriptor {
    /// All eight arms: general summaries first, then action-item-driven.
    pub fn grid() -> Vec<ConfigDescriptor> {
        [false, true]
            .into_iter()
            .flat_map(|action_items| {
                Strategy::ALL
                    .into_iter()
                    .map(move |strategy| ConfigDescriptor {
                        strategy,
                        action_items,
                    })
            })
            .collect()
    }

    /// Directory name, e.g. `complex-cosine.action-items`.
    pub fn dir_name(&self) -> String {
        format!(
            "{}.{}",
            self.strategy,
            if self.action_items {
                "action-items"
            } else {
                "general"
            }
        )
    }

    pub fn from_dir_name(name: &str) -> Option<Self> {
        let (strategy, arm) = name.split_once('.')?;
        let action_items = match arm {
            "action-items" => true,
            "general" => false,
            _ => return None,
        };
        Some(ConfigDescriptor {
            strategy: strategy.parse().ok()?,
            action_items,
        })
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct DocumentScores {
    pub rouge1: ScoreTriple,
    pub rouge2: ScoreTriple,
    pub rouge_l: ScoreTriple,
    pub bertscore: ScoreTriple,
}

impl DocumentScores {
    pub fn score(
        embedder: &dyn Embedder,
        candidate: &str,
        reference: &str,
        options: &BertScoreOptions,
    ) -> Result<Self> {
        Ok(DocumentScores {
            rouge1: rouge_n(candidate, reference, 1)?,
            rouge2: rouge_n(candidate, reference, 2)?,
            rouge_l: rouge_l(candidate, reference)?,
            bertscore: bert_score_with(embedder, candidate, reference, options)?,
        })
    }

    fn mean(docs: &[&DocumentScores]) -> DocumentScores {
        let n = docs.len() as f64;
        let avg = |pick: fn(&DocumentScores) -> ScoreTriple| {
            let sum = docs.iter().fold(ScoreTriple::default(), |acc, d| {
                let t = pick(d);
                ScoreTriple {
                    precision: acc.precision + t.precision,
                    recall: acc.recall + t.recall,
                    f1: acc.f1 + t.f1,
                }
            });
            ScoreTriple {
                precision: sum.precision / n,
                recall: sum.recall / n,
                f1: sum.f1 / n,
            }
        };
        DocumentScores {
            rouge1: avg(|d| d.rouge1),
            rouge2: avg(|d| d.rouge2),
            rouge_l: avg(|d| d.rouge_l),
            bertscore: avg(|d| d.bertscore),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    pub config: Option<ConfigDescriptor>,
    pub documents: BTreeMap<String, DocumentScores>,
    /// Arithmetic means over documents.
    pub mean: DocumentScores,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DocumentPair {
    pub id: String,
    pub candidate: String,
    pub reference: String,
}

pub fn evaluate_corpus(
    embedder: &dyn Embedder,
    pairs: &[DocumentPair],
    config: Option<ConfigDescriptor>,
    options: &BertScoreOptions,
) -> Result<ScoreReport> {
    if pairs.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let mut seen = std::collections::HashSet::new();
    if let Some(dup) = pairs.iter().find(|p| !seen.insert(p.id.as_str())) {
        return Err(Error::InvalidInput(format!(
            "duplicate document id `{}`",
            dup.id
        )));
    }
    let scored: Vec<Result<(String, DocumentScores)>> = pairs
        .par_iter()
        .map(|p| {
            DocumentScores::score(embedder, &p.candidate, &p.reference, options)
                .map(|s| (p.id.clone(), s))
                .map_err(|e| match e {
                    Error::EmptyReference => {
                        Error::InvalidInput(format!("document `{}`: {e}", p.id))
                    }
                    other => other,
                })
        })
        .collect();
    let documents = scored.into_iter().collect::<Result<BTreeMap<_, _>>>()?;
    let mean = DocumentScores::mean(&documents.values().collect::<Vec<_>>());
    Ok(ScoreReport {
        config,
        documents,
        mean,
    })
}

/// One report per evaluated grid arm, in grid order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridReport {
    pub reports: Vec<ScoreReport>,
}

const METRICS: [&str; 4] = ["BERTScore", "R-1", "R-2", "R-L"];

fn f1_columns(scores: &DocumentScores) -> [f64; 4] {
    [
        scores.bertscore.f1,
        scores.rouge1.f1,
        scores.rouge2.f1,
        scores.rouge_l.f1,
    ]
}

impl GridReport {
    fn sections(&self) -> Vec<(Option<&'static str>, Vec<&ScoreReport>)> {
        let titled = |flag: bool| {
            self.reports
                .iter()
                .filter(|r| r.config.is_some_and(|c| c.action_items == flag))
                .collect::<Vec<_>>()
        };
        let untagged: Vec<&ScoreReport> =
            self.reports.iter().filter(|r| r.config.is_none()).collect();
        let mut sections = Vec::new();
        for (title, rows) in [
            (
                Some("General Summaries (Without Action Items)"),
                titled(false),
            ),
            (Some("Action-Item-Driven Summaries"), titled(true)),
            (None, untagged),
        ] {
            if !rows.is_empty() {
                sections.push((title, rows));
            }
        }
        sections
    }

    fn row_label(report: &ScoreReport) -> String {
        match report.config {
            Some(c) if c.strategy == Strategy::Linear => {
                format!("{} (Baseline)", c.strategy.title())
            }
            Some(c) => c.strategy.title().to_string(),
            None => "Corpus".to_string(),
        }
    }

    /// Aligned plain-text table of corpus-mean F1 scores (x100): strategy
    /// rows grouped by arm, metric columns.
    pub fn render_table(&self) -> String {
        let label_width = self
            .reports
            .iter()
            .map(|r| Self::row_label(r).len())
            .chain(std::iter::once("Segmentation".len()))
            .max()
            .unwrap_or(0);
        let mut out = String::new();
        let _ = write!(out, "{:<label_width$}", "Segmentation");
        for m in METRICS {
            let _ = write!(out, "  {m:>9}");
        }
        out.push('\n');
        let rule = "-".repeat(label_width + METRICS.len() * 11);
        for (title, rows) in self.sections() {
            let _ = writeln!(out, "{rule}");
            if let Some(title) = title {
                let _ = writeln!(out, "{title}");
                let _ = writeln!(out, "{rule}");
            }
            for r in rows {
                let _ = write!(out, "{:<label_width$}", Self::row_label(r));
                for v in f1_columns(&r.mean) {
                    let _ = write!(out, "  {:>9.2}", v * 100.0);
                }
                out.push('\n');
            }
        }
        out
    }

    pub fn render_markdown(&self) -> String {
        let mut out = String::from(
            "| Segmentation | BERTScore | R-1 | R-2 | R-L |\n|---|---:|---:|---:|---:|\n",
        );
        for (title, rows) in self.sections() {
            if let Some(title) = title {
                let _ = writeln!(out, "| **{title}** | | | | |");
            }
            for r in rows {
                let _ = write!(out, "| {} |", Self::row_label(r));
                for v in f1_columns(&r.mean) {
                    let _ = write!(out, " {:.2} |", v * 100.0);
                }
                out.push('\n');
            }
        }
        out
    }
}
