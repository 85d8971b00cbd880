use std::collections::BTreeMap;
use std::path::Path;
use std::time::{Duration, Instant};

use anyhow::{ensure, Result};
use intentflow_cli::{run_bench, BenchProvider, RunArgs};

use crate::common::data;

fn tree(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(dir).unwrap().to_string_lossy().into_owned();
                out.insert(rel, std::fs::read(&p).unwrap());
            }
        }
    }
    out
}

/// Two replay runs of the corpus write byte-identical artifacts.
pub fn check() -> Result<String> {
    let start = Instant::now();
    let mut trees = Vec::new();
    for _ in 0..2 {
        let out = tempfile::tempdir()?;
        let args = RunArgs {
            corpus: data().join("corpus.csv"),
            provider: BenchProvider::Replay,
            fixtures: Some(data().join("fixtures/corpus")),
            out: Some(out.path().to_path_buf()),
            provider_config: Default::default(),
            checks: Vec::new(),
        };
        let report = run_bench(&args)?;
        ensure!(report.entries.len() == 12, "expected 12 entries, got {}", report.entries.len());
        trees.push(tree(out.path()));
    }
    let elapsed = start.elapsed();
    let (a, b) = (&trees[0], &trees[1]);
    ensure!(a.keys().eq(b.keys()), "runs wrote different file sets");
    let differing: Vec<&String> = a.iter().filter(|(k, v)| b[*k] != **v).map(|(k, _)| k).collect();
    ensure!(differing.is_empty(), "files differ between runs: {differing:?}");
    let sessions = a.keys().filter(|k| k.starts_with("sessions")).count();
    ensure!(sessions == 12, "expected 12 session exports, found {sessions}");
    ensure!(a.contains_key("report.json") && a.contains_key("report.txt"), "report missing");
    ensure!(elapsed < Duration::from_secs(120), "two runs took {elapsed:?}");
    Ok(format!("{} files byte-identical across two replay runs, {:.2}s total", a.len(), elapsed.as_secs_f64()))
}
