//! Meeting transcripts as speaker turns, plus the rule-based sentence
//! splitter used for action-item classification and recursive passes.

use std::collections::HashSet;
use std::path::Path;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::text::normalize_whitespace;

pub const MAX_SPEAKER_CHARS: usize = 64;

pub const DEFAULT_ABBREVIATIONS: &[&str] =
    &["mr", "mrs", "dr", "ms", "prof", "vs", "etc", "e.g", "i.e"];

/// One speaker's contiguous dialogue.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Turn {
    pub speaker: String,
    pub text: String,
    pub index: usize,
}

impl Turn {
    /// `Speaker: text`, the unit fed to first-pass segmentation.
    pub fn render(&self) -> String {
        format!("{}: {}", self.speaker, self.text)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transcript {
    pub id: String,
    pub turns: Vec<Turn>,
}

impl Transcript {
    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.id = id.into();
        self
    }

    /// Rendered turns, one per element.
    pub fn units(&self) -> Vec<String> {
        self.turns.iter().map(Turn::render).collect()
    }

    /// Plain-format rendering; parsing it again yields the same turns.
    pub fn render(&self) -> String {
        self.units().join("\n")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TranscriptFormat {
    Plain,
    Json,
}

impl TranscriptFormat {
    /// `.json` files and content starting with `[` or `{` are JSON; anything
    /// else is plain.
    pub fn detect(path: Option<&Path>, raw: &str) -> Self {
        let by_extension = path
            .and_then(|p| p.extension())
            .map(|ext| ext.eq_ignore_ascii_case("json"));
        match by_extension {
            Some(true) => TranscriptFormat::Json,
            _ => match raw.trim_start().chars().next() {
                Some('[') | Some('{') => TranscriptFormat::Json,
                _ => TranscriptFormat::Plain,
            },
        }
    }
}

fn speaker_line() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^([^:]{1,64}):(?:\s+(.*))?$").expect("valid regex"))
}

pub fn parse_transcript(raw: &str, format: TranscriptFormat) -> Result<Transcript> {
    match format {
        TranscriptFormat::Plain => parse_plain(raw),
        TranscriptFormat::Json => parse_json(raw),
    }
}

struct TurnBuilder {
    turns: Vec<Turn>,
}

impl TurnBuilder {
    fn new() -> Self {
        TurnBuilder { turns: Vec::new() }
    }

    fn push(&mut self, speaker: &str, text: &str) {
        let text = normalize_whitespace(text);
        if text.is_empty() {
            return;
        }
        match self.turns.last_mut() {
            Some(last) if last.speaker == speaker => {
                last.text.push(' ');
                last.text.push_str(&text);
            }
            _ => {
                let index = self.turns.len();
                self.turns.push(Turn {
                    speaker: speaker.to_string(),
                    text,
                    index,
                });
            }
        }
    }

    fn continue_last(&mut self, text: &str) -> bool {
        let text = normalize_whitespace(text);
        match self.turns.last_mut() {
            Some(last) => {
                last.text.push(' ');
                last.text.push_str(&text);
                true
            }
            None => false,
        }
    }

    fn finish(self, id: String) -> Result<Transcript> {
        if self.turns.is_empty() {
            return Err(Error::EmptyTranscript);
        }
        Ok(Transcript {
            id,
            turns: self.turns,
        })
    }
}

fn parse_plain(raw: &str) -> Result<Transcript> {
    let mut builder = TurnBuilder::new();
    for (line_no, line) in raw.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        match speaker_line().captures(line) {
            Some(caps) => {
                let speaker = normalize_whitespace(&caps[1]);
                let text = caps.get(2).map_or("", |m| m.as_str());
                if !speaker.is_empty() {
                    builder.push(&speaker, text);
                }
            }
            None => {
                if !builder.continue_last(line) {
                    return Err(Error::MalformedInput(format!(
                        "line {} has no `Speaker: ` prefix",
                        line_no + 1
                    )));
                }
            }
        }
    }
    builder.finish(String::new())
}

#[derive(Deserialize)]
struct JsonTurn {
    speaker: String,
    text: String,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum JsonTranscript {
    List(Vec<JsonTurn>),
    Wrapped {
        #[serde(default)]
        id: Option<String>,
        turns: Vec<JsonTurn>,
    },
}

fn parse_json(raw: &str) -> Result<Transcript> {
    if raw.trim().is_empty() {
        return Err(Error::EmptyTranscript);
    }
    let parsed: JsonTranscript = serde_json::from_str(raw).map_err(|e| {
        Error::MalformedInput(format!(
            "expected a list of {{speaker, text}} records or {{id, turns}}: {e}"
        ))
    })?;
    let (id, records) = match parsed {
        JsonTranscript::List(turns) => (None, turns),
        JsonTranscript::Wrapped { id, turns } => (id, turns),
    };
    let mut builder = TurnBuilder::new();
    for (i, record) in records.iter().enumerate() {
        let speaker = normalize_whitespace(&record.speaker);
        if speaker.is_empty()
            || speaker.chars().count() > MAX_SPEAKER_CHARS
            || speaker.contains(':')
        {
            return Err(Error::MalformedInput(format!(
                "record {i}: speaker must be 1-{MAX_SPEAKER_CHARS} characters without ':'"
            )));
        }
        if record.text.trim().is_empty() {
            return Err(Error::MalformedInput(format!("record {i}: empty text")));
        }
        builder.push(&speaker, &record.text);
    }
    builder.finish(id.unwrap_or_default())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sentence {
    pub text: String,
    pub index: usize,
}

#[derive(Debug, Clone)]
pub struct SentenceSplitter {
    abbreviations: HashSet<String>,
}

impl Default for SentenceSplitter {
    fn default() -> Self {
        Self::with_abbreviations(DEFAULT_ABBREVIATIONS.iter().copied())
    }
}

impl SentenceSplitter {
    pub fn with_abbreviations<I, S>(abbreviations: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        SentenceSplitter {
            abbreviations: abbreviations
                .into_iter()
                .map(|a| a.as_ref().trim_end_matches('.').to_lowercase())
                .collect(),
        }
    }

    /// Splits after `.`, `?` or `!` (optionally followed by closing quotes or
    /// brackets) when the next word starts with an uppercase letter or a
    /// digit. A period ending a listed abbreviation is not a boundary.
    pub fn split(&self, text: &str) -> Vec<Sentence> {
        let words: Vec<&str> = text.split_whitespace().collect();
        let mut sentences = Vec::new();
        let mut start = 0;
        for i in 0..words.len() {
            let boundary = match words.get(i + 1) {
                Some(next) => self.ends_sentence(words[i]) && starts_sentence(next),
                None => true,
            };
            if boundary {
                sentences.push(Sentence {
                    text: words[start..=i].join(" "),
                    index: sentences.len(),
                });
                start = i + 1;
            }
        }
        sentences
    }

    fn ends_sentence(&self, word: &str) -> bool {
        let core = word.trim_end_matches(['"', '\'', ')', ']', '\u{201d}', '\u{2019}']);
        match core.chars().last() {
            Some('?') | Some('!') => true,
            Some('.') => !self.is_abbreviation(core),
            _ => false,
        }
    }

    fn is_abbreviation(&self, word: &str) -> bool {
        let stem = word
            .trim_start_matches(|c: char| !c.is_alphanumeric())
            .trim_end_matches('.')
            .to_lowercase();
        !stem.is_empty() && self.abbreviations.contains(&stem)
    }
}

fn starts_sentence(word: &str) -> bool {
    word.chars()
        .find(|c| c.is_alphanumeric())
        .is_some_and(|c| c.is_uppercase() || c.is_ascii_digit())
}

/// Splits with the default abbreviation list.
pub fn split_sentences(text: &str) -> Vec<Sentence> {
    static SPLITTER: OnceLock<SentenceSplitter> = OnceLock::new();
    SPLITTER.get_or_init(SentenceSplitter::default).split(text)
}
