use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use intentflow_service::{serve, ProviderMode, ServiceConfig};

/// HTTP and server-sent-event service for IntentFlow writing sessions.
///
/// The API key for the remote provider is read from the environment
/// variable named by `provider.api_key_env` (default INTENTFLOW_API_KEY).
#[derive(Parser)]
#[command(name = "intentflow-server", version)]
struct Args {
    /// TOML config file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    port: Option<u16>,
    #[arg(long)]
    data_dir: Option<PathBuf>,
    /// remote, replay, record, or scripted.
    #[arg(long)]
    provider: Option<ProviderMode>,
    /// Fixture store, or the script file in scripted mode.
    #[arg(long)]
    fixtures: Option<PathBuf>,
    /// Run without the intent, dimension, and linking stages.
    #[arg(long)]
    baseline: bool,
}

fn config(args: Args) -> Result<ServiceConfig, String> {
    let mut c = match &args.config {
        Some(path) => ServiceConfig::load(path).map_err(|e| e.to_string())?,
        None => ServiceConfig::default(),
    };
    c.port = args.port.unwrap_or(c.port);
    c.data_dir = args.data_dir.unwrap_or(c.data_dir);
    c.provider_mode = args.provider.unwrap_or(c.provider_mode);
    c.fixtures = args.fixtures.or(c.fixtures);
    c.baseline |= args.baseline;
    Ok(c)
}

#[tokio::main]
async fn main() -> ExitCode {
    tracing_subscriber::fmt().with_writer(std::io::stderr).init();
    let config = match config(Args::parse()) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    match serve(config).await {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
