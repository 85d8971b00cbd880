//! Small text helpers shared by reconciliation, linking, and the harness checks.

use std::collections::BTreeSet;

/// Case-folds, trims, and collapses internal whitespace runs to one space.
///
/// Two intents (or dimension titles) are considered the same item when their
/// normalized forms are equal.
pub fn normalize(text: &str) -> String {
    text.split_whitespace()
        .map(|w| w.to_lowercase())
        .collect::<Vec<_>>()
        .join(" ")
}

const STOPWORDS: &[&str] = &[
    "a", "about", "after", "all", "also", "an", "and", "any", "are", "as", "at", "be", "been",
    "being", "between", "both", "but", "by", "can", "do", "does", "each", "for", "from", "has",
    "have", "how", "i", "if", "in", "into", "is", "it", "its", "it's", "make", "may", "me", "more",
    "most", "my", "no", "not", "of", "on", "one", "or", "other", "our", "out", "over", "should",
    "so", "some", "such", "than", "that", "the", "their", "them", "then", "there", "these", "they",
    "this", "those", "through", "to", "too", "under", "up", "use", "using", "very", "was", "way",
    "we", "were", "what", "when", "where", "whether", "which", "while", "who", "why", "will",
    "with", "without", "would", "write", "you", "your",
];

fn stem(word: &str) -> String {
    let w = word.strip_suffix("'s").unwrap_or(word);
    if w.len() <= 3 {
        return w.to_string();
    }
    if ["sses", "xes", "ches", "shes"].iter().any(|s| w.ends_with(s)) {
        return w[..w.len() - 2].to_string();
    }
    if let Some(base) = w.strip_suffix("ies") {
        return format!("{base}y");
    }
    if w.ends_with('s') && !["ss", "is", "us"].iter().any(|s| w.ends_with(s)) {
        return w[..w.len() - 1].to_string();
    }
    w.to_string()
}

/// Lower-cased alphanumeric words with stopwords removed and a trailing plural
/// `s` stripped. Used as the "content token" set by the structural checks.
pub fn content_tokens(text: &str) -> BTreeSet<String> {
    text.split(|c: char| !(c.is_alphanumeric() || c == '\''))
        .map(|w| w.trim_matches('\'').to_lowercase())
        .filter(|w| !w.is_empty() && !STOPWORDS.contains(&w.as_str()))
        .map(|w| stem(&w))
        .collect()
}

/// Jaccard similarity of the content-token sets of two texts. Two texts with
/// no content tokens at all are treated as identical (1.0).
pub fn token_jaccard(a: &str, b: &str) -> f64 {
    let a = content_tokens(a);
    let b = content_tokens(b);
    if a.is_empty() && b.is_empty() {
        return 1.0;
    }
    let inter = a.intersection(&b).count() as f64;
    let union = a.union(&b).count() as f64;
    inter / union
}

/// Replaces control characters with a space and trims the result.
pub fn strip_control(text: &str) -> String {
    text.chars()
        .map(|c| if c.is_control() { ' ' } else { c })
        .collect::<String>()
        .trim()
        .to_string()
}

pub fn char_len(text: &str) -> usize {
    text.chars().count()
}

/// Converts a byte offset (on a char boundary) to a char offset.
pub fn byte_to_char(text: &str, byte: usize) -> usize {
    text[..byte].chars().count()
}

/// Substring by char offsets, clamped to the text.
pub fn char_slice(text: &str, start: usize, end: usize) -> &str {
    let mut indices = text.char_indices().map(|(i, _)| i).chain(std::iter::once(text.len()));
    let begin = indices.by_ref().nth(start).unwrap_or(text.len());
    let finish = if end > start {
        indices.nth(end - start - 1).unwrap_or(text.len())
    } else {
        begin
    };
    &text[begin..finish]
}
