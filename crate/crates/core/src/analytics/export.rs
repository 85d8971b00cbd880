//! Row-oriented (CSV) and structured (JSON) export of action logs.
//!
//! CSV columns, one row per action:
//!
//! | column | meaning |
//! |---|---|
//! | `session_id` | owning session |
//! | `action_id` | numeric id, unique within the session |
//! | `kind` | `Add`, `Delete`, `Correct`, `Adjust`, or `Rollback` |
//! | `source` | `chat_prompt`, `targeted_prompt`, `goal_edit`, `intent_widget`, `dimension_widget`, `rollback_button` |
//! | `auto_classified` | `true` / `false` |
//! | `annotation_pending` | `true` / `false` |
//! | `timestamp` | ISO-8601 / RFC 3339 UTC with full sub-second precision |
//! | `payload` | free-form detail |
//!
//! Sessions are regrouped on import in first-appearance order. A session with
//! no actions has no rows, so only the JSON format preserves it.

use std::io::{Read, Write};

use chrono::{DateTime, SecondsFormat, Utc};

use super::{AnalyticsError, SessionLog};
use crate::model::{ActionId, ActionRecord, SessionId};

pub const CSV_COLUMNS: [&str; 8] = [
    "session_id",
    "action_id",
    "kind",
    "source",
    "auto_classified",
    "annotation_pending",
    "timestamp",
    "payload",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExportFormat {
    Csv,
    Json,
}

impl std::str::FromStr for ExportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "csv" => Ok(ExportFormat::Csv),
            "json" => Ok(ExportFormat::Json),
            other => Err(format!("unknown export format {other:?} (csv|json)")),
        }
    }
}

pub fn export_logs<W: Write>(logs: &[SessionLog], format: ExportFormat, mut out: W) -> Result<(), AnalyticsError> {
    match format {
        ExportFormat::Json => {
            serde_json::to_writer_pretty(&mut out, logs).map_err(|e| AnalyticsError::Format(e.to_string()))?;
            out.write_all(b"\n")?;
        }
        ExportFormat::Csv => {
            let mut w = csv::Writer::from_writer(out);
            w.write_record(CSV_COLUMNS).map_err(csv_err)?;
            for log in logs {
                for a in &log.actions {
                    w.write_record([
                        log.session_id.0.as_str(),
                        &a.action_id.0.to_string(),
                        a.kind.as_str(),
                        a.source.as_str(),
                        &a.auto_classified.to_string(),
                        &a.annotation_pending.to_string(),
                        &a.timestamp.to_rfc3339_opts(SecondsFormat::AutoSi, true),
                        &a.payload,
                    ])
                    .map_err(csv_err)?;
                }
            }
            w.flush()?;
        }
    }
    Ok(())
}

pub fn import_logs<R: Read>(format: ExportFormat, input: R) -> Result<Vec<SessionLog>, AnalyticsError> {
    match format {
        ExportFormat::Json => serde_json::from_reader(input).map_err(|e| AnalyticsError::Format(e.to_string())),
        ExportFormat::Csv => {
            let mut r = csv::Reader::from_reader(input);
            let headers = r.headers().map_err(csv_err)?.clone();
            if headers.iter().ne(CSV_COLUMNS) {
                return Err(AnalyticsError::Format(format!("unexpected header {headers:?}")));
            }
            let mut logs: Vec<SessionLog> = Vec::new();
            for (row, rec) in r.records().enumerate() {
                let rec = rec.map_err(csv_err)?;
                let line = row + 2;
                let field = |i: usize| rec.get(i).unwrap_or_default();
                let bad = |col: &str, e: String| AnalyticsError::Format(format!("line {line}, {col}: {e}"));
                let action = ActionRecord {
                    action_id: ActionId(field(1).parse().map_err(|e| bad("action_id", format!("{e}")))?),
                    kind: field(2).parse().map_err(|e| bad("kind", e))?,
                    source: field(3).parse().map_err(|e| bad("source", e))?,
                    auto_classified: field(4).parse().map_err(|e| bad("auto_classified", format!("{e}")))?,
                    annotation_pending: field(5).parse().map_err(|e| bad("annotation_pending", format!("{e}")))?,
                    timestamp: DateTime::parse_from_rfc3339(field(6))
                        .map_err(|e| bad("timestamp", e.to_string()))?
                        .with_timezone(&Utc),
                    payload: field(7).to_string(),
                };
                let sid = field(0);
                match logs.iter_mut().find(|l| l.session_id.0 == sid) {
                    Some(l) => l.actions.push(action),
                    None => logs.push(SessionLog { session_id: SessionId(sid.to_string()), actions: vec![action] }),
                }
            }
            Ok(logs)
        }
    }
}

fn csv_err(e: csv::Error) -> AnalyticsError {
    AnalyticsError::Format(e.to_string())
}
