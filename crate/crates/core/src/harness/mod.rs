//! Structural evaluation over a prompt corpus.
//!
//! Each corpus entry gets a fresh session (`entry-01`, `entry-02`, ...), a
//! deterministic clock, and its own gateway in audit mode, and runs one full
//! first turn. The checks in [`checks`] then judge what the turn produced.

pub mod checks;
pub mod corpus;
pub mod forms;
pub mod report;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use thiserror::Error;

pub use checks::{run_check, CheckConfig, CheckId, CheckInput, CheckResult, Verdict};
pub use corpus::{load_corpus, CorpusEntry, CorpusError, WritingContext};
pub use forms::{export_rating_forms, render_form, QUESTIONS};
pub use report::{EntryOutput, EntryReport, StructuralReport, REPORT_SCHEMA};

use crate::clock::SteppingClock;
use crate::gateway::schema::ValidationMode;
use crate::gateway::ScriptedProvider;
use crate::gateway::{Gateway, GatewayError, JournalEntry, Provider, ProviderConfig};
use crate::model::{LinkRepairs, SessionId, SessionState};
use crate::pipeline::{Pipeline, TurnTrace};

/// Entries in flight at once.
const ENTRY_CONCURRENCY: usize = 4;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("{0}")]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    Provider(#[from] GatewayError),
    #[error("{path}: {message}")]
    Script { path: PathBuf, message: String },
}

pub fn session_id(index: usize) -> String {
    format!("entry-{:02}", index + 1)
}

/// Builds the provider for one entry.
pub type ProviderFactory<'a> = dyn Fn(usize, &CorpusEntry) -> Result<Arc<dyn Provider>, GatewayError> + Sync + 'a;

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub provider: ProviderConfig,
    pub checks: CheckConfig,
    /// Where report, session exports, and rendered requests go.
    pub out_dir: Option<PathBuf>,
}

/// One entry's run with its artifacts.
pub struct EntryRun {
    pub report: EntryReport,
    pub session: SessionState,
    pub requests: Vec<JournalEntry>,
    pub trace: TurnTrace,
}

pub fn run_entry(
    index: usize,
    entry: &CorpusEntry,
    provider: Arc<dyn Provider>,
    options: &RunOptions,
) -> EntryRun {
    let gateway = Arc::new(
        Gateway::new(provider, options.provider.clone()).with_mode(ValidationMode::Audit).with_journal(),
    );
    let pipeline = Pipeline::new(gateway.clone()).with_clock(Arc::new(SteppingClock::fixed()));
    let id = session_id(index);
    let mut session = SessionState::with_id(SessionId(id.clone()));
    let outcome = pipeline.run_turn(&mut session, &entry.prompt, None, &mut |_| {});
    let (trace, error) = match outcome {
        Ok(t) => (t.trace, None),
        Err(e) => (TurnTrace::default(), Some(e.to_string())),
    };
    let page = session.latest_page();
    let input = CheckInput { prompt: &entry.prompt, trace: &trace, page };
    let checks: BTreeMap<CheckId, CheckResult> = CheckId::ALL
        .into_iter()
        .map(|c| {
            let mut r = run_check(c, &input, &options.checks);
            if let (Some(e), Verdict::Fail) = (&error, r.verdict) {
                r.evidence.insert(0, format!("pipeline run failed: {e}"));
            }
            (c, r)
        })
        .collect();
    let report = EntryReport {
        index,
        session_id: id,
        writing_context: entry.writing_context,
        task: entry.task.clone(),
        topic: entry.topic.clone(),
        prompt: entry.prompt.clone(),
        error,
        checks,
        repairs: page.map_or_else(LinkRepairs::default, |p| p.repairs),
        output: page.map(EntryOutput::from_page),
    };
    EntryRun { report, requests: gateway.take_journal(), session, trace }
}

/// Runs every entry and assembles the report. Entry failures are recorded
/// in the report; only artifact IO aborts the run.
pub fn run_corpus(
    corpus: &[CorpusEntry],
    providers: &ProviderFactory<'_>,
    options: &RunOptions,
) -> Result<StructuralReport, HarnessError> {
    let runs = run_entries(corpus, providers, options);
    if let Some(dir) = &options.out_dir {
        write_entry_artifacts(dir, &runs)?;
    }
    let report = StructuralReport::assemble(options.checks.clone(), runs.into_iter().map(|r| r.report).collect());
    if let Some(dir) = &options.out_dir {
        write_report(dir, &report)?;
    }
    Ok(report)
}

pub fn run_entries(corpus: &[CorpusEntry], providers: &ProviderFactory<'_>, options: &RunOptions) -> Vec<EntryRun> {
    let mut runs = Vec::with_capacity(corpus.len());
    let indexed: Vec<(usize, &CorpusEntry)> = corpus.iter().enumerate().collect();
    for chunk in indexed.chunks(ENTRY_CONCURRENCY) {
        let done: Vec<EntryRun> = std::thread::scope(|scope| {
            let handles: Vec<_> = chunk
                .iter()
                .map(|&(i, entry)| {
                    scope.spawn(move || match providers(i, entry) {
                        Ok(p) => run_entry(i, entry, p, options),
                        Err(e) => failed_entry(i, entry, &e.to_string(), options),
                    })
                })
                .collect();
            handles
                .into_iter()
                .zip(chunk)
                .map(|(h, &(i, entry))| h.join().unwrap_or_else(|_| failed_entry(i, entry, "entry run panicked", options)))
                .collect()
        });
        runs.extend(done);
    }
    runs
}

fn failed_entry(index: usize, entry: &CorpusEntry, error: &str, options: &RunOptions) -> EntryRun {
    let trace = TurnTrace::default();
    let input = CheckInput { prompt: &entry.prompt, trace: &trace, page: None };
    let checks = CheckId::ALL
        .into_iter()
        .map(|c| {
            let mut r = run_check(c, &input, &options.checks);
            if r.verdict == Verdict::Fail {
                r.evidence.insert(0, format!("pipeline run failed: {error}"));
            }
            (c, r)
        })
        .collect();
    let id = session_id(index);
    EntryRun {
        report: EntryReport {
            index,
            session_id: id.clone(),
            writing_context: entry.writing_context,
            task: entry.task.clone(),
            topic: entry.topic.clone(),
            prompt: entry.prompt.clone(),
            error: Some(error.to_string()),
            checks,
            repairs: LinkRepairs::default(),
            output: None,
        },
        session: SessionState::with_id(SessionId(id)),
        requests: Vec::new(),
        trace,
    }
}

/// `sessions/<id>.json` and `requests/<id>.json` under `dir`.
pub fn write_entry_artifacts(dir: &Path, runs: &[EntryRun]) -> std::io::Result<()> {
    let sessions = dir.join("sessions");
    let requests = dir.join("requests");
    std::fs::create_dir_all(&sessions)?;
    std::fs::create_dir_all(&requests)?;
    for r in runs {
        let id = &r.report.session_id;
        std::fs::write(sessions.join(format!("{id}.json")), r.session.to_document_json())?;
        let rendered = serde_json::to_string_pretty(&r.requests).expect("journal serializes");
        std::fs::write(requests.join(format!("{id}.json")), rendered + "\n")?;
    }
    Ok(())
}

/// `report.json` and `report.txt` under `dir`.
pub fn write_report(dir: &Path, report: &StructuralReport) -> std::io::Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("report.json"), report.to_json())?;
    std::fs::write(dir.join("report.txt"), report.render_text())
}

/// Loads the authoring script for entry `index` from `dir`
/// (`<dir>/entry-NN.json`, a serialized [`ScriptedProvider`]).
pub fn load_script(dir: &Path, index: usize) -> Result<ScriptedProvider, HarnessError> {
    let path = dir.join(format!("{}.json", session_id(index)));
    let text = std::fs::read_to_string(&path)?;
    serde_json::from_str(&text).map_err(|e| HarnessError::Script { path, message: e.to_string() })
}
