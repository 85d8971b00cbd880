use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use intentflow_cli::{analyze, author_fixtures, export_actions, run_bench, BenchProvider, RunArgs};
use intentflow_core::analytics::ExportFormat;
use intentflow_core::harness::{export_rating_forms, StructuralReport};
use intentflow_service::ServiceConfig;

/// Structural evaluation and action analytics for IntentFlow sessions.
///
/// Check thresholds are set with `--check.<check>.<param>=<value>`, e.g.
/// `--check.q3s.max_jaccard=0.5` or `--check.q8s.enabled=false`.
#[derive(Parser)]
#[command(name = "intentflow-bench", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the pipeline over a prompt corpus and judge the results.
    Run {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, value_enum, default_value = "replay")]
        provider: BenchProvider,
        /// Fixture store (replay, record) or authoring scripts (scripted).
        #[arg(long)]
        fixtures: Option<PathBuf>,
        /// Directory for report.json, report.txt, sessions/, requests/.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Service config file; only its [provider] table is used.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Also write rating forms under <out>/forms.
        #[arg(long)]
        forms: bool,
    },
    /// Summarize the actions of stored sessions.
    Analyze {
        #[arg(long)]
        sessions: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write every action of stored sessions as CSV or JSON.
    ExportActions {
        #[arg(long)]
        sessions: PathBuf,
        #[arg(long, default_value = "csv")]
        format: ExportFormat,
        #[arg(long)]
        out: PathBuf,
    },
    /// Render rating forms from a report.json.
    Forms {
        #[arg(long)]
        report: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Record the shipped replay stores from the authoring scripts.
    AuthorFixtures {
        #[arg(long, default_value = "data/corpus.csv")]
        corpus: PathBuf,
        #[arg(long, default_value = "data/authoring")]
        authoring: PathBuf,
        #[arg(long, default_value = "data/fixtures")]
        out: PathBuf,
    },
}

/// Pulls `--check.<check>.<param>=<value>` out of the arguments; clap cannot
/// declare open-ended flag names.
fn split_check_overrides(args: impl Iterator<Item = String>) -> (Vec<String>, Vec<String>) {
    let mut rest = Vec::new();
    let mut checks = Vec::new();
    for a in args {
        match a.strip_prefix("--check.") {
            Some(o) => checks.push(o.to_string()),
            None => rest.push(a),
        }
    }
    (rest, checks)
}

fn main() -> ExitCode {
    tracing_subscriber::fmt().with_writer(std::io::stderr).with_max_level(tracing::Level::WARN).init();
    let (args, checks) = split_check_overrides(std::env::args());
    let cli = Cli::parse_from(args);
    match execute(cli.command, checks) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn execute(command: Command, checks: Vec<String>) -> Result<ExitCode> {
    match command {
        Command::Run { corpus, provider, fixtures, out, config, forms } => {
            let provider_config = match config {
                Some(path) => ServiceConfig::load(&path)?.provider,
                None => Default::default(),
            };
            let args = RunArgs { corpus, provider, fixtures, out: out.clone(), provider_config, checks };
            let report = run_bench(&args)?;
            print!("{}", report.render_text());
            if let (true, Some(out)) = (forms, &out) {
                let written = export_rating_forms(&report, &out.join("forms"))?;
                eprintln!("wrote {} rating forms", written.len());
            }
            Ok(ExitCode::from(report.exit_code() as u8))
        }
        Command::Analyze { sessions, out } => {
            let summary = analyze(&sessions, &out)?;
            print!("{}", summary.render_text());
            Ok(ExitCode::SUCCESS)
        }
        Command::ExportActions { sessions, format, out } => {
            let n = export_actions(&sessions, format, &out)?;
            eprintln!("wrote {n} actions to {}", out.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Forms { report, out } => {
            let text = std::fs::read_to_string(&report).with_context(|| format!("reading {}", report.display()))?;
            let report = StructuralReport::from_json(&text)?;
            let written = export_rating_forms(&report, &out)?;
            eprintln!("wrote {} rating forms to {}", written.len(), out.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::AuthorFixtures { corpus, authoring, out } => {
            let report = author_fixtures(&corpus, &authoring, &out)?;
            eprintln!("recorded {} corpus entries and the walkthrough under {}", report.entries.len(), out.display());
            Ok(ExitCode::SUCCESS)
        }
    }
}
