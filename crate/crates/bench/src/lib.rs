//! Shared inputs for the criterion benchmarks.

use std::path::PathBuf;

use intentflow_core::{OutputDocument, Section};

pub fn data_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data")
}

const WORDS: [&str; 12] =
    ["light", "leaf", "sugar", "water", "carbon", "oxygen", "energy", "cell", "plant", "chlorophyll", "the", "and"];

/// A deterministic document of roughly `words` words in paragraphs of 40.
pub fn document(words: usize, seed: u64) -> OutputDocument {
    let mut x = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
    let mut body = Vec::with_capacity(words);
    for i in 0..words {
        x ^= x << 13;
        x ^= x >> 7;
        x ^= x << 17;
        body.push(WORDS[(x % WORDS.len() as u64) as usize]);
        if i % 40 == 39 {
            body.push("\n\n");
        }
    }
    OutputDocument::new(vec![Section { header: Some("Overview".into()), body: body.join(" ") }])
}

/// `doc` with every `every`-th word replaced.
pub fn edited(doc: &OutputDocument, every: usize) -> OutputDocument {
    let text: Vec<String> = doc
        .canonical_text()
        .split(' ')
        .enumerate()
        .map(|(i, w)| if i % every == 0 { "revised".to_string() } else { w.to_string() })
        .collect();
    OutputDocument::from_text(text.join(" "))
}

/// First-turn prompt of the recorded walkthrough fixtures.
pub const PROMPT: &str = "Write a scientific and concise article on photosynthesis";
