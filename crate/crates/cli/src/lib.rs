//! Library side of the `intentflow-bench` and `intentflow-server` binaries.

pub mod bench;
pub mod sessions;
pub mod walkthrough;

pub use bench::{author_fixtures, run_bench, BenchProvider, RunArgs};
pub use sessions::{analyze, export_actions, load_sessions};
