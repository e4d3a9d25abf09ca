//! Whitespace normalization and token-prefix helpers shared by segmentation
//! and truncation.

use crate::backends::TokenCounter;
use crate::error::Result;

/// Collapses every whitespace run (spaces, tabs, newlines) into one space and
/// trims both ends.
pub fn normalize_whitespace(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Splits `text` into its longest prefix holding at most `max_tokens` backend
/// tokens and the remainder.
///
/// Cuts fall on whitespace. Every whitespace-separated word is assumed to
/// yield at least one token, which bounds the search to `max_tokens` words.
/// A single word longer than the budget is cut between characters so that
/// every call makes progress.
pub fn split_token_prefix(
    counter: &dyn TokenCounter,
    text: &str,
    max_tokens: usize,
) -> Result<(String, String)> {
    let words: Vec<&str> = text.split_whitespace().collect();
    if words.is_empty() {
        return Ok((String::new(), String::new()));
    }
    if counter.count_tokens(text)? <= max_tokens {
        return Ok((words.join(" "), String::new()));
    }

    // Largest k with count(words[..k]) <= max_tokens.
    let (mut lo, mut hi) = (0usize, words.len().min(max_tokens));
    while lo < hi {
        let mid = (lo + hi).div_ceil(2);
        if counter.count_tokens(&words[..mid].join(" "))? <= max_tokens {
            lo = mid;
        } else {
            hi = mid - 1;
        }
    }
    if lo > 0 {
        return Ok((words[..lo].join(" "), words[lo..].join(" ")));
    }

    let chars: Vec<char> = words[0].chars().collect();
    let (mut lo, mut hi) = (1usize, chars.len());
    while lo < hi {
        let mid = (lo + hi).div_ceil(2);
        let piece: String = chars[..mid].iter().collect();
        if counter.count_tokens(&piece)? <= max_tokens {
            lo = mid;
        } else {
            hi = mid - 1;
        }
    }
    let head: String = chars[..lo].iter().collect();
    let mut rest: String = chars[lo..].iter().collect();
    for word in &words[1..] {
        if !rest.is_empty() {
            rest.push(' ');
        }
        rest.push_str(word);
    }
    Ok((head, rest))
}

/// First `max_tokens` backend tokens of `text`; identity when already within
/// the bound.
pub fn truncate_text(counter: &dyn TokenCounter, text: &str, max_tokens: usize) -> Result<String> {
    Ok(split_token_prefix(counter, text, max_tokens)?.0)
}

/// Cuts `text` into consecutive pieces of at most `max_tokens` tokens.
pub fn split_into_token_windows(
    counter: &dyn TokenCounter,
    text: &str,
    max_tokens: usize,
) -> Result<Vec<String>> {
    let mut pieces = Vec::new();
    let mut rest = normalize_whitespace(text);
    while !rest.is_empty() {
        let (head, tail) = split_token_prefix(counter, &rest, max_tokens)?;
        pieces.push(head);
        rest = tail;
    }
    Ok(pieces)
}
