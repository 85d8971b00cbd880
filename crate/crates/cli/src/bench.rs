//! The structural evaluation run and fixture authoring.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use intentflow_core::gateway::{FixtureProvider, RemoteProvider};
use intentflow_core::harness::{self, load_corpus, load_script, CheckConfig, CorpusEntry, RunOptions, StructuralReport};
use intentflow_core::{Provider, ProviderConfig};

use crate::walkthrough;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum BenchProvider {
    /// Answer from a recorded fixture store.
    Replay,
    /// Call the remote endpoint and store every response.
    Record,
    /// Call the remote endpoint.
    Remote,
    /// Answer from authoring scripts (`<fixtures>/entry-NN.json`).
    Scripted,
}

#[derive(Debug, Clone)]
pub struct RunArgs {
    pub corpus: PathBuf,
    pub provider: BenchProvider,
    pub fixtures: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub provider_config: ProviderConfig,
    /// `<check>.<param>=<value>` overrides.
    pub checks: Vec<String>,
}

fn fixtures(args: &RunArgs) -> Result<&Path> {
    args.fixtures.as_deref().with_context(|| format!("--fixtures is required with --provider {:?}", args.provider))
}

pub fn run_bench(args: &RunArgs) -> Result<StructuralReport> {
    let corpus = load_corpus(&args.corpus)?;
    let mut checks = CheckConfig::default();
    for o in &args.checks {
        checks.apply_override(o).map_err(anyhow::Error::msg)?;
    }
    let options = RunOptions { provider: args.provider_config.clone(), checks, out_dir: args.out.clone() };
    let report = match args.provider {
        BenchProvider::Replay => {
            let store: Arc<dyn Provider> = Arc::new(FixtureProvider::replay(fixtures(args)?)?);
            harness::run_corpus(&corpus, &|_, _| Ok(store.clone()), &options)?
        }
        BenchProvider::Record => {
            let upstream: Arc<dyn Provider> = Arc::new(RemoteProvider::from_config(&args.provider_config)?);
            let store: Arc<dyn Provider> = Arc::new(FixtureProvider::record(fixtures(args)?, upstream)?);
            harness::run_corpus(&corpus, &|_, _| Ok(store.clone()), &options)?
        }
        BenchProvider::Remote => {
            let remote: Arc<dyn Provider> = Arc::new(RemoteProvider::from_config(&args.provider_config)?);
            harness::run_corpus(&corpus, &|_, _| Ok(remote.clone()), &options)?
        }
        BenchProvider::Scripted => {
            let dir = fixtures(args)?.to_path_buf();
            let scripts = (0..corpus.len()).map(|i| load_script(&dir, i)).collect::<Result<Vec<_>, _>>()?;
            let factory = |i: usize, _: &CorpusEntry| Ok(Arc::new(scripts[i].clone()) as Arc<dyn Provider>);
            harness::run_corpus(&corpus, &factory, &options)?
        }
    };
    Ok(report)
}

/// Records the shipped replay stores from the authoring scripts:
/// `<out>/corpus` for the evaluation corpus and `<out>/walkthrough` for the
/// photosynthesis scenario. Existing stores are replaced.
pub fn author_fixtures(corpus: &Path, authoring: &Path, out: &Path) -> Result<StructuralReport> {
    let entries = load_corpus(corpus)?;
    let corpus_store = out.join("corpus");
    let walk_store = out.join("walkthrough");
    for dir in [&corpus_store, &walk_store] {
        if dir.exists() {
            std::fs::remove_dir_all(dir).with_context(|| format!("removing {}", dir.display()))?;
        }
    }
    let scripts = (0..entries.len()).map(|i| load_script(authoring, i)).collect::<Result<Vec<_>, _>>()?;
    let factory = |i: usize, _: &CorpusEntry| {
        Ok(Arc::new(FixtureProvider::record(&corpus_store, Arc::new(scripts[i].clone()))?) as Arc<dyn Provider>)
    };
    let report = harness::run_corpus(&entries, &factory, &RunOptions::default())?;
    if !report.all_passed {
        bail!("authoring scripts do not pass every check:\n{}", report.render_text());
    }

    let script = walkthrough::load_script(&authoring.join("walkthrough.json"))?;
    let recorder = FixtureProvider::record(&walk_store, Arc::new(script))?;
    walkthrough::run(walkthrough::pipeline(Arc::new(recorder)))?;
    Ok(report)
}
