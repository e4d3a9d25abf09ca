//! Action-item-driven summarization of long meeting transcripts.
//!
//! A transcript is segmented into topical chunks that fit the summarizer's
//! input limit, each chunk is summarized (optionally enriched with
//! rewritten action items), and the joined summaries are summarized again
//! until they fit. Model calls go through the traits in [`backends`], with
//! deterministic mocks and an HTTP client provided.

pub mod action_items;
pub mod backends;
pub mod cli;
pub mod error;
pub mod evaluation;
pub mod pipeline;
pub mod segmentation;
pub mod text;
pub mod transcript;

pub use error::{Error, Result};
