use std::net::SocketAddr;
use std::path::PathBuf;

use anyhow::Context;
use clap::Parser;
use dlpp_core::proxy::ProxyModel;
use dlpp_service::{router, AppState};

#[derive(Debug, Parser)]
#[command(name = "dlpp-service", version, about = "Load planning HTTP service")]
struct Args {
    #[arg(long, default_value = "127.0.0.1:8080")]
    bind: SocketAddr,
    /// Directory for stored instances and solutions.
    #[arg(long)]
    store: PathBuf,
    /// Trained proxy model; proxy and what-if solves need one.
    #[arg(long)]
    model: Option<PathBuf>,
    /// Concurrent solves before requests are refused with 409.
    #[arg(long, default_value_t = 2)]
    workers: usize,
}

#[tokio::main]
async fn main() -> anyhow::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("DLPP_LOG", "info")).init();
    let args = Args::parse();
    let model = args
        .model
        .as_deref()
        .map(|p| ProxyModel::load(p).with_context(|| format!("loading {}", p.display())))
        .transpose()?;
    let state = AppState::new(&args.store, model, args.workers).context("opening store")?;
    let listener = tokio::net::TcpListener::bind(args.bind).await?;
    log::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(state)).await?;
    Ok(())
}
