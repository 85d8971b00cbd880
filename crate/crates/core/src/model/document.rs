use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use super::types::{DimensionId, IntentId, PanelSnapshot};
use crate::text;

/// Separator placed between section bodies in the canonical text.
pub const SECTION_SEPARATOR: &str = "\n\n";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Section {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub header: Option<String>,
    pub body: String,
}

/// Char range of one section body inside the canonical text.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SectionRange {
    pub start: usize,
    pub end: usize,
}

/// A sectioned document plus its canonical text. Section bodies are joined
/// by [`SECTION_SEPARATOR`]; `section_offsets[i]` is the char range of body
/// `i`, so links are portable without re-deriving offsets.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawDocument")]
pub struct OutputDocument {
    sections: Vec<Section>,
    canonical_text: String,
    section_offsets: Vec<SectionRange>,
}

#[derive(Deserialize)]
struct RawDocument {
    sections: Vec<Section>,
    canonical_text: String,
    section_offsets: Vec<SectionRange>,
}

impl TryFrom<RawDocument> for OutputDocument {
    type Error = String;

    fn try_from(raw: RawDocument) -> Result<Self, Self::Error> {
        let doc = OutputDocument {
            sections: raw.sections,
            canonical_text: raw.canonical_text,
            section_offsets: raw.section_offsets,
        };
        doc.check_offsets()?;
        Ok(doc)
    }
}

impl OutputDocument {
    pub fn new(sections: Vec<Section>) -> Self {
        let mut canonical_text = String::new();
        let mut section_offsets = Vec::with_capacity(sections.len());
        let mut cursor = 0;
        for (i, s) in sections.iter().enumerate() {
            if i > 0 {
                canonical_text.push_str(SECTION_SEPARATOR);
                cursor += SECTION_SEPARATOR.len();
            }
            let len = text::char_len(&s.body);
            canonical_text.push_str(&s.body);
            section_offsets.push(SectionRange { start: cursor, end: cursor + len });
            cursor += len;
        }
        OutputDocument { sections, canonical_text, section_offsets }
    }

    /// Single untitled section.
    pub fn from_text(body: impl Into<String>) -> Self {
        Self::new(vec![Section { header: None, body: body.into() }])
    }

    pub fn sections(&self) -> &[Section] {
        &self.sections
    }

    pub fn canonical_text(&self) -> &str {
        &self.canonical_text
    }

    pub fn section_offsets(&self) -> &[SectionRange] {
        &self.section_offsets
    }

    /// Length of the canonical text in chars.
    pub fn len(&self) -> usize {
        text::char_len(&self.canonical_text)
    }

    pub fn is_empty(&self) -> bool {
        self.canonical_text.is_empty()
    }

    pub fn slice(&self, span: Span) -> &str {
        text::char_slice(&self.canonical_text, span.start, span.end)
    }

    /// Verifies that the offset table tiles the canonical text: bodies and
    /// separators alternate with no gaps, and each range matches its body.
    pub fn check_offsets(&self) -> Result<(), String> {
        if self.sections.len() != self.section_offsets.len() {
            return Err(format!(
                "{} sections but {} offset entries",
                self.sections.len(),
                self.section_offsets.len()
            ));
        }
        let sep = SECTION_SEPARATOR.len();
        let mut cursor = 0;
        for (i, (s, r)) in self.sections.iter().zip(&self.section_offsets).enumerate() {
            if i > 0 {
                cursor += sep;
            }
            if r.start != cursor || r.end != r.start + text::char_len(&s.body) {
                return Err(format!("section {i} offsets {}..{} inconsistent", r.start, r.end));
            }
            if text::char_slice(&self.canonical_text, r.start, r.end) != s.body {
                return Err(format!("section {i} body does not match canonical text"));
            }
            cursor = r.end;
        }
        if cursor != self.len() {
            return Err(format!("offset table covers {cursor} chars of {}", self.len()));
        }
        Ok(())
    }
}

/// Half-open char range `[start, end)` into a document's canonical text.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Self {
        Span { start, end }
    }

    pub fn len(&self) -> usize {
        self.end.saturating_sub(self.start)
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum LinkSource {
    Intent { id: IntentId },
    DimensionValue { dimension: DimensionId, value: String },
}

impl LinkSource {
    fn rank(&self) -> (u8, u32, &str) {
        match self {
            LinkSource::Intent { id } => (0, id.0, ""),
            LinkSource::DimensionValue { dimension, value } => (1, dimension.0, value.as_str()),
        }
    }

    pub fn resolves_in(&self, snapshot: &PanelSnapshot) -> bool {
        match self {
            LinkSource::Intent { id } => snapshot.intent(*id).is_some(),
            LinkSource::DimensionValue { dimension, value } => snapshot
                .dimension(*dimension)
                .is_some_and(|d| d.accepts_value(value)),
        }
    }
}

impl PartialOrd for LinkSource {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for LinkSource {
    fn cmp(&self, other: &Self) -> Ordering {
        self.rank().cmp(&other.rank())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Link {
    pub source: LinkSource,
    pub spans: Vec<Span>,
}

impl Link {
    /// Strict well-formedness: every span in bounds and non-empty, spans
    /// sorted and pairwise disjoint, source resolvable.
    pub fn check(&self, doc_len: usize, snapshot: &PanelSnapshot) -> Result<(), String> {
        if !self.source.resolves_in(snapshot) {
            return Err(format!("link source {:?} does not resolve", self.source));
        }
        let mut prev_end = None;
        for s in &self.spans {
            if s.start >= s.end || s.end > doc_len {
                return Err(format!("span {}..{} invalid for text of {doc_len} chars", s.start, s.end));
            }
            if let Some(pe) = prev_end {
                if s.start < pe {
                    return Err(format!("span {}..{} overlaps or is out of order", s.start, s.end));
                }
            }
            prev_end = Some(s.end);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn doc3() -> OutputDocument {
        OutputDocument::new(vec![
            Section { header: Some("Intro".into()), body: "Plants make food.".into() },
            Section { header: None, body: "Light drives it.".into() },
            Section { header: Some("End".into()), body: "Done.".into() },
        ])
    }

    #[test]
    fn offsets_partition_the_text() {
        let d = doc3();
        assert_eq!(d.sections().len(), 3);
        d.check_offsets().unwrap();
        let r = d.section_offsets();
        assert_eq!(r[0], SectionRange { start: 0, end: 17 });
        assert_eq!(r[1].start, 19);
        assert_eq!(d.slice(Span::new(r[2].start, r[2].end)), "Done.");
        assert_eq!(r[2].end, d.len());
    }

    #[test]
    fn empty_document_is_consistent() {
        let d = OutputDocument::new(vec![]);
        assert!(d.is_empty());
        d.check_offsets().unwrap();
    }

    #[test]
    fn tampered_offsets_are_rejected_on_load() {
        let d = doc3();
        let mut v = serde_json::to_value(&d).unwrap();
        v["section_offsets"][1]["start"] = serde_json::json!(18);
        assert!(serde_json::from_value::<OutputDocument>(v).is_err());
        let ok: OutputDocument = serde_json::from_value(serde_json::to_value(&d).unwrap()).unwrap();
        assert_eq!(ok, d);
    }

    #[test]
    fn multibyte_bodies_use_char_offsets() {
        let d = OutputDocument::new(vec![
            Section { header: None, body: "Über".into() },
            Section { header: None, body: "naïve".into() },
        ]);
        d.check_offsets().unwrap();
        assert_eq!(d.section_offsets()[1], SectionRange { start: 6, end: 11 });
        assert_eq!(d.slice(Span::new(6, 11)), "naïve");
    }

    #[test]
    fn link_sources_order_intents_first() {
        let mut v = [
            LinkSource::DimensionValue { dimension: DimensionId(1), value: "3".into() },
            LinkSource::Intent { id: IntentId(7) },
            LinkSource::Intent { id: IntentId(2) },
        ];
        v.sort();
        assert_eq!(v[0], LinkSource::Intent { id: IntentId(2) });
        assert!(matches!(v[2], LinkSource::DimensionValue { .. }));
    }
}
