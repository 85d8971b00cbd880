use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::document::{Link, OutputDocument};
use super::types::PanelSnapshot;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Provenance {
    Initial,
    ChatPrompt,
    TargetedPrompt,
    PanelEdit,
    RollbackOf { page: u32 },
}

/// Counters of lenient fixes applied while turning model link output into
/// well-formed links.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LinkRepairs {
    /// Links whose source is not on the panel snapshot.
    pub unresolved_sources: u32,
    /// Spans that were empty or inverted (after clamping).
    pub dropped_spans: u32,
    /// Spans cut back to the text bounds.
    pub clamped_spans: u32,
    /// Overlapping spans fused together.
    pub merged_spans: u32,
    /// Quotes the model returned that do not occur in the document.
    pub unlocated_quotes: u32,
    /// Linking requests that failed outright.
    pub failed_requests: u32,
}

impl LinkRepairs {
    pub fn total(&self) -> u32 {
        self.unresolved_sources
            + self.dropped_spans
            + self.clamped_spans
            + self.merged_spans
            + self.unlocated_quotes
            + self.failed_requests
    }

    pub fn absorb(&mut self, other: &LinkRepairs) {
        self.unresolved_sources += other.unresolved_sources;
        self.dropped_spans += other.dropped_spans;
        self.clamped_spans += other.clamped_spans;
        self.merged_spans += other.merged_spans;
        self.unlocated_quotes += other.unlocated_quotes;
        self.failed_requests += other.failed_requests;
    }
}

/// One immutable generation result.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutputPage {
    pub page_number: u32,
    pub document: OutputDocument,
    pub snapshot: PanelSnapshot,
    pub links: Vec<Link>,
    pub provenance: Provenance,
    #[serde(default)]
    pub repairs: LinkRepairs,
}

impl OutputPage {
    /// Hash of the page's content, excluding its number and provenance.
    pub fn content_hash(&self) -> String {
        let body = serde_json::to_vec(&(&self.document, &self.snapshot, &self.links))
            .expect("page content serializes");
        hex_digest(&body)
    }

    /// Hash over everything, page number and provenance included.
    pub fn full_hash(&self) -> String {
        hex_digest(&serde_json::to_vec(self).expect("page serializes"))
    }

    pub fn summary(&self) -> PageSummary {
        PageSummary {
            page_number: self.page_number,
            provenance: self.provenance,
            section_count: self.document.sections().len(),
            link_count: self.links.len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PageSummary {
    pub page_number: u32,
    pub provenance: Provenance,
    pub section_count: usize,
    pub link_count: usize,
}

/// Everything needed to append a page except the snapshot, which is always
/// taken from the live panel at append time.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PageDraft {
    pub document: OutputDocument,
    pub links: Vec<Link>,
    pub provenance: Provenance,
    #[serde(default)]
    pub repairs: LinkRepairs,
}

pub(crate) fn hex_digest(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}
