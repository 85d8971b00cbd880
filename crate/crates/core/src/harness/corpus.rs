//! Prompt corpora.
//!
//! CSV format, one entry per row, with the header
//! `writing_context,task,topic,prompt`. A JSON array of objects with the
//! same fields is accepted too (chosen by a `.json` extension).

use std::fmt;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const CORPUS_COLUMNS: [&str; 4] = ["writing_context", "task", "topic", "prompt"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WritingContext {
    Academic,
    Creative,
    Journalistic,
    Personal,
    Professional,
    Technical,
}

impl WritingContext {
    pub const ALL: [WritingContext; 6] = [
        WritingContext::Academic,
        WritingContext::Creative,
        WritingContext::Journalistic,
        WritingContext::Personal,
        WritingContext::Professional,
        WritingContext::Technical,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            WritingContext::Academic => "academic",
            WritingContext::Creative => "creative",
            WritingContext::Journalistic => "journalistic",
            WritingContext::Personal => "personal",
            WritingContext::Professional => "professional",
            WritingContext::Technical => "technical",
        }
    }
}

impl fmt::Display for WritingContext {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for WritingContext {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let lower = s.trim().to_ascii_lowercase();
        WritingContext::ALL
            .into_iter()
            .find(|c| c.as_str() == lower)
            .ok_or_else(|| format!("unknown writing context {s:?}"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusEntry {
    pub writing_context: WritingContext,
    pub task: String,
    pub topic: String,
    pub prompt: String,
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("line {line}, field {field}: {message}")]
    Parse { line: usize, field: String, message: String },
    #[error("{0}")]
    Io(#[from] std::io::Error),
}

fn parse_error(line: usize, field: &str, message: impl Into<String>) -> CorpusError {
    CorpusError::Parse { line, field: field.to_string(), message: message.into() }
}

pub fn load_corpus(path: &Path) -> Result<Vec<CorpusEntry>, CorpusError> {
    let file = std::fs::File::open(path)?;
    if path.extension().is_some_and(|e| e == "json") {
        parse_corpus_json(file)
    } else {
        parse_corpus_csv(file)
    }
}

pub fn parse_corpus_csv<R: Read>(input: R) -> Result<Vec<CorpusEntry>, CorpusError> {
    let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let headers = r.headers().map_err(|e| parse_error(1, "header", e.to_string()))?.clone();
    let column = |name: &str| {
        headers.iter().position(|h| h == name).ok_or_else(|| parse_error(1, name, "missing column"))
    };
    let idx: Vec<usize> = CORPUS_COLUMNS.iter().map(|c| column(c)).collect::<Result<_, _>>()?;
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            parse_error(line, "row", e.to_string())
        })?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        let field = |i: usize| rec.get(idx[i]).unwrap_or("").to_string();
        out.push(entry(line, &field(0), field(1), field(2), field(3))?);
    }
    Ok(out)
}

#[derive(Deserialize)]
struct RawEntry {
    writing_context: String,
    #[serde(default)]
    task: String,
    #[serde(default)]
    topic: String,
    #[serde(default)]
    prompt: String,
}

pub fn parse_corpus_json<R: Read>(input: R) -> Result<Vec<CorpusEntry>, CorpusError> {
    let raw: Vec<RawEntry> = serde_json::from_reader(input).map_err(|e| parse_error(e.line(), "document", e.to_string()))?;
    raw.into_iter()
        .enumerate()
        .map(|(i, r)| entry(i + 1, &r.writing_context, r.task, r.topic, r.prompt))
        .collect()
}

fn entry(line: usize, context: &str, task: String, topic: String, prompt: String) -> Result<CorpusEntry, CorpusError> {
    let writing_context = context.parse().map_err(|m: String| parse_error(line, "writing_context", m))?;
    let prompt = prompt.trim().to_string();
    if prompt.is_empty() {
        return Err(parse_error(line, "prompt", "must not be empty"));
    }
    Ok(CorpusEntry { writing_context, task: task.trim().into(), topic: topic.trim().into(), prompt })
}
