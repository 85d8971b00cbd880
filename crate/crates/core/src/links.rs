//! Lenient repair of model-produced links.
//!
//! Nothing here fails: links whose source is gone are dropped, spans are
//! clamped to the text, empty or inverted spans are dropped, and overlapping
//! spans are merged. Every fix is counted in [`LinkRepairs`].

use std::collections::BTreeMap;

use crate::model::{Link, LinkRepairs, LinkSource, OutputDocument, PanelSnapshot, Span};
use crate::text;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValidatedLinks {
    pub links: Vec<Link>,
    pub repairs: LinkRepairs,
}

/// Repairs `links` against `document` and `snapshot`. The result is sorted by
/// source, holds at most one link per source, and satisfies [`Link::check`].
pub fn validate_links(document: &OutputDocument, snapshot: &PanelSnapshot, links: Vec<Link>) -> ValidatedLinks {
    let len = document.len();
    let mut repairs = LinkRepairs::default();
    let mut by_source: BTreeMap<LinkSource, Vec<Span>> = BTreeMap::new();
    for link in links {
        if !link.source.resolves_in(snapshot) {
            repairs.unresolved_sources += 1;
            continue;
        }
        let spans = by_source.entry(link.source).or_default();
        for s in link.spans {
            let clamped = Span::new(s.start.min(len), s.end.min(len));
            if clamped.is_empty() {
                repairs.dropped_spans += 1;
                continue;
            }
            if clamped != s {
                repairs.clamped_spans += 1;
            }
            spans.push(clamped);
        }
    }
    let links = by_source
        .into_iter()
        .map(|(source, spans)| {
            let (spans, merged) = merge_spans(spans);
            repairs.merged_spans += merged;
            Link { source, spans }
        })
        .collect();
    ValidatedLinks { links, repairs }
}

/// Sorts and fuses overlapping spans. Touching spans (`a.end == b.start`)
/// stay separate. Returns the number of merges performed.
fn merge_spans(mut spans: Vec<Span>) -> (Vec<Span>, u32) {
    spans.sort();
    let mut out: Vec<Span> = Vec::with_capacity(spans.len());
    let mut merged = 0;
    for s in spans {
        match out.last_mut() {
            Some(last) if s.start < last.end => {
                last.end = last.end.max(s.end);
                merged += 1;
            }
            _ => out.push(s),
        }
    }
    (out, merged)
}

/// Locates each quote at its first occurrence in the canonical text. Returns
/// the spans found and the number of quotes that could not be found.
pub fn locate_quotes(document: &OutputDocument, quotes: &[String]) -> (Vec<Span>, u32) {
    let haystack = document.canonical_text();
    let mut spans = Vec::new();
    let mut missing = 0;
    for q in quotes {
        let q = q.trim();
        if q.is_empty() {
            missing += 1;
            continue;
        }
        match haystack.find(q) {
            Some(byte) => {
                let start = text::byte_to_char(haystack, byte);
                spans.push(Span::new(start, start + text::char_len(q)));
            }
            None => missing += 1,
        }
    }
    (spans, missing)
}
