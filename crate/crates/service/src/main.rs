use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use clap::Parser;
use voxclass_service::{serve, AppState, ModelRegistry, DEFAULT_SILENCE_DBFS};

/// Serves trained models for live classification.
#[derive(Parser, Debug)]
#[command(name = "voxclass-service", version)]
struct Args {
    /// Model files written by `voxclass train`, at most one per task.
    #[arg(long = "model", required = true)]
    models: Vec<PathBuf>,
    #[arg(long, default_value = "127.0.0.1:8765")]
    addr: SocketAddr,
    /// Chunks below this RMS level are reported as silence.
    #[arg(long = "silence-dbfs", default_value_t = DEFAULT_SILENCE_DBFS, allow_hyphen_values = true)]
    silence_dbfs: f64,
}

#[tokio::main]
async fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::try_from_env("VOXCLASS_LOG").unwrap_or_else(|_| "info".into()))
        .with_writer(std::io::stderr)
        .init();
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let registry = match ModelRegistry::load(&args.models) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    for m in registry.info() {
        tracing::info!(task = m.task, d = m.d, frequencies = ?m.frequencies_hz, "model loaded");
    }
    let state = AppState { registry: Arc::new(registry), silence_dbfs: args.silence_dbfs };
    let shutdown = async {
        let _ = tokio::signal::ctrl_c().await;
    };
    match serve(state, args.addr, shutdown).await {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
