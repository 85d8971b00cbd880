//! Loading stored sessions for analysis and export.
//!
//! A sessions directory may hold exported session documents (`*.json`, as
//! written by `intentflow-bench run --out`), service session directories
//! (`<id>/events.jsonl`), or a whole service data directory.

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use anyhow::{Context, Result};
use intentflow_core::analytics::{export_logs, ExportFormat};
use intentflow_core::{summarize, ActionSummary, SessionLog, SessionState};
use intentflow_service::EventLog;

pub fn load_sessions(dir: &Path) -> Result<Vec<SessionState>> {
    if dir.join("sessions").is_dir() && dir.join("LOCK").exists() {
        return load_sessions(&dir.join("sessions"));
    }
    let mut paths: Vec<_> = std::fs::read_dir(dir)
        .with_context(|| format!("reading {}", dir.display()))?
        .collect::<Result<Vec<_>, _>>()?
        .into_iter()
        .map(|e| e.path())
        .collect();
    paths.sort();
    let mut out = Vec::new();
    for path in paths {
        if path.is_dir() && path.join("events.jsonl").exists() {
            let id = path.file_name().and_then(|n| n.to_str()).unwrap_or_default().to_string();
            let (_, state, _) = EventLog::open(&path, &id).with_context(|| format!("replaying {}", path.display()))?;
            out.push(state);
        } else if path.extension().is_some_and(|e| e == "json") {
            let text = std::fs::read_to_string(&path)?;
            let state =
                SessionState::from_document_json(&text).with_context(|| format!("parsing {}", path.display()))?;
            out.push(state);
        }
    }
    Ok(out)
}

/// Summarizes every session under `sessions` and writes `summary.json` and
/// `summary.txt` into `out`.
pub fn analyze(sessions: &Path, out: &Path) -> Result<ActionSummary> {
    let logs: Vec<SessionLog> = load_sessions(sessions)?.iter().map(SessionLog::from).collect();
    let summary = summarize(&logs);
    std::fs::create_dir_all(out)?;
    std::fs::write(out.join("summary.json"), serde_json::to_string_pretty(&summary)? + "\n")?;
    std::fs::write(out.join("summary.txt"), summary.render_text())?;
    Ok(summary)
}

/// Writes every action of every session under `sessions` to `out`.
pub fn export_actions(sessions: &Path, format: ExportFormat, out: &Path) -> Result<usize> {
    let logs: Vec<SessionLog> = load_sessions(sessions)?.iter().map(SessionLog::from).collect();
    let file = File::create(out).with_context(|| format!("creating {}", out.display()))?;
    export_logs(&logs, format, BufWriter::new(file))?;
    Ok(logs.iter().map(|l| l.actions.len()).sum())
}
