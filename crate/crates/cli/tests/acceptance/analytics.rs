use anyhow::{ensure, Result};
use chrono::{TimeZone, Utc};
use intentflow_core::analytics::{export_logs, import_logs, summarize, ExportFormat, SessionLog};
use intentflow_core::*;

const CORRECT: [u64; 12] = [1, 0, 0, 1, 0, 1, 0, 1, 0, 1, 0, 1];

fn record(n: &mut u64, kind: ActionKind) -> ActionRecord {
    *n += 1;
    ActionRecord {
        action_id: ActionId(*n),
        kind,
        source: ActionSource::ChatPrompt,
        auto_classified: true,
        annotation_pending: false,
        timestamp: Utc.timestamp_opt(1_700_000_000 + *n as i64, 0).unwrap(),
        payload: format!("prompt {n}"),
    }
}

fn log(id: usize, kinds: &[(ActionKind, u64)]) -> SessionLog {
    let mut n = 0;
    let actions = kinds.iter().flat_map(|&(k, c)| (0..c).map(move |_| k)).map(|k| record(&mut n, k)).collect();
    SessionLog { session_id: SessionId(format!("p{id:02}")), actions }
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * b.abs().max(1.0)
}

pub fn check() -> Result<String> {
    let logs: Vec<SessionLog> = CORRECT
        .iter()
        .enumerate()
        .map(|(i, &c)| log(i, &[(ActionKind::Add, 2), (ActionKind::Adjust, 1), (ActionKind::Correct, c)]))
        .collect();
    let s = summarize(&logs);
    ensure!(s.sessions == 12 && s.total == 42, "sessions {} total {}", s.sessions, s.total);
    let want_counts = [(ActionKind::Add, 24), (ActionKind::Adjust, 12), (ActionKind::Correct, 6), (ActionKind::Delete, 0)];
    for (k, c) in want_counts {
        ensure!(s.counts[&k] == c, "{k} count {} != {c}", s.counts[&k]);
    }

    let correct = s.per_session[&ActionKind::Correct].unwrap();
    ensure!(correct.mean == 0.5, "Correct mean {}", correct.mean);
    ensure!(format!("{:.2}", correct.mean) == "0.50");
    let sd = correct.sd.unwrap();
    ensure!(close(sd, (3.0f64 / 11.0).sqrt()), "Correct sd {sd}");
    let add = s.per_session[&ActionKind::Add].unwrap();
    ensure!(add.mean == 2.0 && add.sd == Some(0.0), "Add {add:?}");

    for (k, p) in [(ActionKind::Add, 400.0 / 7.0), (ActionKind::Adjust, 200.0 / 7.0), (ActionKind::Correct, 100.0 / 7.0)] {
        let got = s.percentages[&k].unwrap();
        ensure!(close(got, p), "{k} percentage {got} != {p}");
    }
    ensure!(s.percentages[&ActionKind::Rollback] == Some(0.0));

    let even = summarize(&[log(0, &[(ActionKind::Add, 2), (ActionKind::Adjust, 2)])]);
    ensure!(even.percentages[&ActionKind::Add] == Some(50.0) && even.percentages[&ActionKind::Adjust] == Some(50.0));
    ensure!(even.per_session[&ActionKind::Add].unwrap().sd.is_none(), "sd with one session");

    let empty = summarize(&[log(0, &[])]);
    ensure!(empty.total == 0 && empty.percentages.values().all(Option::is_none), "empty log percentages");
    ensure!(summarize(&[]).per_session.values().all(Option::is_none), "no sessions");

    for format in [ExportFormat::Csv, ExportFormat::Json] {
        let mut buf = Vec::new();
        export_logs(&logs, format, &mut buf)?;
        let back = import_logs(format, buf.as_slice())?;
        ensure!(summarize(&back) == s, "{format:?} round trip changed the summary");
    }
    Ok(format!("Correct mean {:.2} sd {:.4}; Add {:.4}% Adjust {:.4}% Correct {:.4}%; CSV and JSON round trips agree",
        correct.mean, sd, 400.0 / 7.0, 200.0 / 7.0, 100.0 / 7.0))
}
