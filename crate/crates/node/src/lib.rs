//! The rentchain node: a single-writer ledger behind an HTTP API.

pub mod api;
pub mod config;
pub mod engine;
pub mod mempool;
pub mod service;

use std::future::Future;

use rentchain_core::wallet::WalletFile;
use rentchain_core::KeyPair;
use tokio::net::TcpListener;

pub use config::NodeConfig;
pub use engine::{BlockSummary, NodeCore, NodeError, Rejection, Snapshot, Submitted};
pub use service::NodeHandle;

/// Unlocks the admin wallet named in the config, if any.
pub fn load_admin_key(config: &NodeConfig) -> Result<Option<KeyPair>, NodeError> {
    let Some(path) = &config.admin_wallet else {
        return Ok(None);
    };
    let wallet = WalletFile::load(path).map_err(|e| NodeError::Config(format!("admin wallet: {e}")))?;
    let passphrase = std::env::var(config::ENV_ADMIN_PASSPHRASE)
        .map_err(|_| NodeError::Config(format!("{} is not set", config::ENV_ADMIN_PASSPHRASE)))?;
    wallet
        .unlock(&passphrase)
        .map(Some)
        .map_err(|e| NodeError::Config(format!("admin wallet: {e}")))
}

/// Serves the API on `listener` until `shutdown` resolves.
pub async fn serve(
    core: NodeCore,
    listener: TcpListener,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    let (handle, writer) = NodeHandle::spawn(core);
    let app = api::router(handle);
    axum::serve(listener, app).with_graceful_shutdown(shutdown).await?;
    // the router (and its handle) is gone; the writer drains and exits
    tokio::task::spawn_blocking(move || writer.join()).await.ok();
    Ok(())
}

/// Opens the data directory and serves on the configured address.
pub async fn run(config: NodeConfig) -> Result<(), NodeError> {
    let admin = load_admin_key(&config)?;
    let core = NodeCore::open(&config, admin)?;
    let listener = TcpListener::bind(config.listen).await?;
    tracing::info!(addr = %listener.local_addr()?, height = core.chain().height(), "node listening");
    serve(core, listener, async {
        let _ = tokio::signal::ctrl_c().await;
    })
    .await?;
    Ok(())
}
