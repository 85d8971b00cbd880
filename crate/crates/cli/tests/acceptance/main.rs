//! Acceptance gate: one PASS/FAIL line per criterion, non-zero exit on any
//! failure. Run with `cargo test -p intentflow-cli --test acceptance`.

mod analytics;
mod atomicity;
mod common;
mod determinism;
mod diff;
mod harness;
mod keep;
mod links;
mod rollback;

use std::process::ExitCode;
use std::time::Instant;

type Check = fn() -> anyhow::Result<String>;

const CRITERIA: [(&str, Check); 8] = [
    ("determinism", determinism::check),
    ("structural-harness", harness::check),
    ("rollback-suite", rollback::check),
    ("diff-oracle", diff::check),
    ("keep-persistence", keep::check),
    ("link-validity", links::check),
    ("turn-atomicity", atomicity::check),
    ("analytics", analytics::check),
];

fn main() -> ExitCode {
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (name, check) in CRITERIA {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(check).unwrap_or_else(|p| {
            let msg = p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()));
            Err(anyhow::anyhow!("panicked: {}", msg.unwrap_or_default()))
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS {name}: {detail} ({secs:.1}s)"),
            Err(e) => {
                failed += 1;
                println!("FAIL {name}: {e:#} ({secs:.1}s)");
            }
        }
    }
    if failed == 0 { ExitCode::SUCCESS } else { ExitCode::FAILURE }
}
