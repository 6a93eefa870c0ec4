use std::net::{IpAddr, SocketAddr};
use std::path::PathBuf;
use std::sync::Arc;
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use anyhow::{bail, Context};
use clap::{Parser, Subcommand, ValueEnum};
use prewrite_core::llm::{MockProvider, Provider};
use prewrite_core::persist;
use prewrite_core::sim::{self, SimConfig};
use prewrite_core::{CanvasDocument, EngineConfig, SchedulerConfig, SectionId};
use prewrite_server::{remote_provider, ActorConfig};
use tracing_subscriber::EnvFilter;

#[derive(Parser)]
#[command(name = "prewrite", version, about = "Diagram canvas with background LLM microtasks")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Clone, Copy, ValueEnum)]
enum ProviderKind {
    Mock,
    Remote,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run the HTTP/WebSocket service.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: IpAddr,
        #[arg(long, value_enum, default_value_t = ProviderKind::Mock)]
        provider: ProviderKind,
        /// Chat-completions base URL, e.g. https://api.example.com/v1
        #[arg(long)]
        base_url: Option<String>,
        #[arg(long)]
        model: Option<String>,
        #[arg(long, default_value_t = SchedulerConfig::default().tick_seconds)]
        tick_seconds: f64,
        /// Document file; loaded if present, written on save and shutdown.
        #[arg(long)]
        doc: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Per-request timeout for the remote provider, in seconds.
        #[arg(long, default_value_t = 60)]
        request_timeout: u64,
    },
    /// Replay a trace on a virtual clock and write the event log.
    Simulate {
        #[arg(long)]
        trace: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Optional JSON simulation config (engine settings, latency, faults).
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Print the outline of a section.
    Outline {
        #[arg(long)]
        doc: PathBuf,
        #[arg(long)]
        section: SectionId,
    },
}

fn main() -> anyhow::Result<()> {
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("info")))
        .with_writer(std::io::stderr)
        .init();
    match Cli::parse().command {
        Cmd::Serve { port, host, provider, base_url, model, tick_seconds, doc, seed, request_timeout } => {
            let scheduler = SchedulerConfig { tick_seconds, ..SchedulerConfig::default() };
            if let Err(e) = scheduler.validate() {
                bail!("invalid scheduler settings: {e}");
            }
            let provider: Arc<dyn Provider> = match provider {
                ProviderKind::Mock => Arc::new(MockProvider::new(seed)),
                ProviderKind::Remote => {
                    remote_provider(base_url.as_deref(), model.as_deref(), Duration::from_secs(request_timeout))?
                }
            };
            let document = match &doc {
                Some(path) if path.exists() => {
                    persist::load(path).with_context(|| format!("loading {}", path.display()))?
                }
                _ => {
                    let now = SystemTime::now().duration_since(UNIX_EPOCH)?.as_millis() as u64;
                    CanvasDocument::with_defaults(now)
                }
            };
            let config = ActorConfig::new(EngineConfig { scheduler, ..EngineConfig::default() }, seed, doc);
            let runtime = tokio::runtime::Runtime::new()?;
            runtime.block_on(async move {
                let running = prewrite_server::start(document, provider, config, SocketAddr::new(host, port)).await?;
                shutdown_signal().await;
                tracing::info!("shutting down");
                running.stop().await?;
                anyhow::Ok(())
            })
        }
        Cmd::Simulate { trace, seed, out, config } => {
            let text = std::fs::read_to_string(&trace).with_context(|| format!("reading {}", trace.display()))?;
            let script = sim::parse_trace(&text)?;
            let config: SimConfig = match config {
                Some(path) => serde_json::from_str(&std::fs::read_to_string(&path)?)
                    .with_context(|| format!("parsing {}", path.display()))?,
                None => SimConfig::default(),
            };
            let events = sim::simulate(&script, seed, config)?;
            std::fs::write(&out, persist::to_canonical_json(&events))
                .with_context(|| format!("writing {}", out.display()))?;
            println!("{} events written to {}", events.len(), out.display());
            Ok(())
        }
        Cmd::Outline { doc, section } => {
            let document = persist::load(&doc).with_context(|| format!("loading {}", doc.display()))?;
            println!("{}", document.section_outline(section)?);
            Ok(())
        }
    }
}

async fn shutdown_signal() {
    let ctrl_c = async {
        let _ = tokio::signal::ctrl_c().await;
    };
    #[cfg(unix)]
    let term = async {
        match tokio::signal::unix::signal(tokio::signal::unix::SignalKind::terminate()) {
            Ok(mut s) => {
                s.recv().await;
            }
            Err(_) => std::future::pending::<()>().await,
        }
    };
    #[cfg(not(unix))]
    let term = std::future::pending::<()>();
    tokio::select! {
        _ = ctrl_c => {}
        _ = term => {}
    }
}
