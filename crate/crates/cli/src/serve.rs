use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::Context;
use clap::Args;

use zsie_service::{router, AppState};

use crate::{backend, Common};

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, env = "ZSIE_PORT", default_value_t = 8080)]
    port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    host: String,
    /// Directory for the per-session label logs; labels stay in memory
    /// when omitted.
    #[arg(long)]
    labels: Option<PathBuf>,
    /// Directory of static UI assets.
    #[arg(long)]
    ui: Option<PathBuf>,
}

pub fn serve(common: &Common, args: ServeArgs) -> anyhow::Result<ExitCode> {
    let schema = common.schema()?;
    let config = common.run_config()?;
    // Built before the runtime starts: the blocking HTTP clients own their own.
    let backends = backend::build(common.backend.as_deref(), common.tagger.as_deref(), &config)?;
    let addr: SocketAddr = format!("{}:{}", args.host, args.port)
        .parse()
        .with_context(|| format!("invalid address {}:{}", args.host, args.port))?;
    let state = Arc::new(AppState::new(schema, config, backends, args.labels));
    let app = router(state, args.ui);
    let runtime = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    runtime.block_on(async move {
        let listener = tokio::net::TcpListener::bind(addr).await.with_context(|| format!("binding {addr}"))?;
        eprintln!("listening on http://{}", listener.local_addr()?);
        zsie_service::serve(listener, app).await.context("serving")
    })?;
    Ok(ExitCode::SUCCESS)
}
