//! Command line front end: wallet handling, transaction signing and a few
//! local chain maintenance verbs.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rentchain_core::store::{export_json, load_chain, BlockExport, StoreError};
use rentchain_core::wallet::{WalletError, WalletFile, DEFAULT_ITERATIONS};
use rentchain_core::{KeyPair, Payload, Transaction};
use rentchain_node::NodeConfig;
use reqwest::StatusCode;
use serde_json::{json, Value};

mod client;

pub use client::NodeClient;

pub const ENV_PASSPHRASE: &str = "RENTCHAIN_PASSPHRASE";

#[derive(Debug, Parser)]
#[command(name = "rentchain", version, about = "Vehicle rental ledger node and client")]
pub struct Cli {
    /// Base URL of the node API.
    #[arg(long, global = true, env = "RENTCHAIN_NODE", default_value = "http://127.0.0.1:8080")]
    pub node: String,
    /// Wallet file used by signing verbs.
    #[arg(long, global = true, env = "RENTCHAIN_WALLET", default_value = "wallet.json")]
    pub wallet: PathBuf,
    /// Output is always JSON; the flag is accepted for scripts that pass it.
    #[arg(long, global = true)]
    pub json: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a node.
    #[command(subcommand)]
    Node(NodeCmd),
    /// Create or inspect the wallet file.
    #[command(subcommand)]
    Wallet(WalletCmd),
    /// Driving license registry.
    #[command(subcommand)]
    License(LicenseCmd),
    /// Vehicles offered for rent.
    #[command(subcommand)]
    Fleet(FleetCmd),
    /// Rent a vehicle, locking a deposit in escrow.
    Rent {
        #[arg(long)]
        vehicle: String,
        #[arg(long)]
        license: String,
        #[arg(long)]
        deposit: u64,
    },
    /// Top up the deposit of an active rental.
    Fund {
        #[arg(long)]
        vehicle: String,
        #[arg(long)]
        amount: u64,
    },
    /// Return a rented vehicle and settle the escrow.
    Return {
        #[arg(long)]
        vehicle: String,
    },
    /// Rental day clock (admin only).
    #[command(subcommand)]
    Day(DayCmd),
    /// Operate on a local data directory.
    #[command(subcommand)]
    Chain(ChainCmd),
}

#[derive(Debug, Subcommand)]
pub enum NodeCmd {
    Start(ConfigArg),
}

#[derive(Debug, Subcommand)]
pub enum WalletCmd {
    /// Generate a key and write it, encrypted, to the wallet path.
    New {
        /// PBKDF2 rounds for the key encryption key.
        #[arg(long, default_value_t = DEFAULT_ITERATIONS)]
        iterations: u32,
        /// Overwrite an existing wallet file.
        #[arg(long)]
        force: bool,
    },
    /// Print the public part of the wallet.
    Show,
}

#[derive(Debug, Subcommand)]
pub enum LicenseCmd {
    Add {
        #[arg(long)]
        license: String,
    },
    List,
}

#[derive(Debug, Subcommand)]
pub enum FleetCmd {
    Add {
        #[arg(long)]
        vehicle: String,
        /// Daily price in currency units.
        #[arg(long)]
        price: u64,
    },
    List,
}

#[derive(Debug, Subcommand)]
pub enum DayCmd {
    Advance,
}

#[derive(Debug, Subcommand)]
pub enum ChainCmd {
    /// Re-validate every stored block from genesis.
    Verify(ConfigArg),
    /// Dump the stored chain as JSON.
    Export {
        #[command(flatten)]
        config: ConfigArg,
        /// Write one block per line to this file instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
pub struct ConfigArg {
    /// Node configuration file.
    #[arg(long, env = "RENTCHAIN_CONFIG", default_value = "node.json")]
    pub config: PathBuf,
}

/// A failed invocation. Node envelopes are kept verbatim.
#[derive(Debug)]
pub enum CliError {
    Api { status: StatusCode, envelope: Value },
    Chain(Value),
    Local { error: &'static str, detail: String },
}

impl CliError {
    pub fn local(error: &'static str, detail: impl Into<String>) -> Self {
        CliError::Local {
            error,
            detail: detail.into(),
        }
    }

    pub fn envelope(&self) -> Value {
        match self {
            CliError::Api { envelope, .. } | CliError::Chain(envelope) => envelope.clone(),
            CliError::Local { error, detail } => json!({ "error": error, "detail": detail }),
        }
    }
}

impl From<WalletError> for CliError {
    fn from(e: WalletError) -> Self {
        let name = match e {
            WalletError::BadPassphrase => "BadPassphrase",
            WalletError::Io(_) => "WalletIo",
            _ => "WalletError",
        };
        CliError::local(name, e.to_string())
    }
}

pub fn run(cli: Cli) -> Result<Value, CliError> {
    let node = || NodeClient::new(&cli.node);
    match cli.command {
        Command::Node(NodeCmd::Start(arg)) => start_node(&arg.config),
        Command::Wallet(WalletCmd::New { iterations, force }) => new_wallet(&cli.wallet, iterations, force),
        Command::Wallet(WalletCmd::Show) => {
            let w = WalletFile::load(&cli.wallet)?;
            Ok(json!({ "address": w.address, "public_key_hex": w.public_key_hex, "path": cli.wallet }))
        }
        Command::License(LicenseCmd::Add { license }) => {
            submit(&node(), &cli.wallet, Payload::AddLicense { license_id: license })
        }
        Command::License(LicenseCmd::List) => node().get("/state/licenses"),
        Command::Fleet(FleetCmd::Add { vehicle, price }) => submit(
            &node(),
            &cli.wallet,
            Payload::AddVehicle {
                vehicle_id: vehicle,
                daily_price: price,
            },
        ),
        Command::Fleet(FleetCmd::List) => node().get("/state/vehicles"),
        Command::Rent {
            vehicle,
            license,
            deposit,
        } => submit(
            &node(),
            &cli.wallet,
            Payload::RentCar {
                vehicle_id: vehicle,
                license_id: license,
                deposit,
            },
        ),
        Command::Fund { vehicle, amount } => submit(
            &node(),
            &cli.wallet,
            Payload::AddFunds {
                vehicle_id: vehicle,
                amount,
            },
        ),
        Command::Return { vehicle } => submit(&node(), &cli.wallet, Payload::ReturnCar { vehicle_id: vehicle }),
        Command::Day(DayCmd::Advance) => submit(&node(), &cli.wallet, Payload::AdvanceDay {}),
        Command::Chain(ChainCmd::Verify(arg)) => verify_chain(&arg.config),
        Command::Chain(ChainCmd::Export { config, out }) => export_chain(&config.config, out.as_deref()),
    }
}

fn passphrase(confirm: bool) -> Result<String, CliError> {
    if let Ok(p) = std::env::var(ENV_PASSPHRASE) {
        return Ok(p);
    }
    let read = |prompt: &str| {
        rpassword::prompt_password(prompt)
            .map_err(|e| CliError::local("BadPassphrase", format!("cannot read passphrase: {e}")))
    };
    let first = read("wallet passphrase: ")?;
    if confirm && read("repeat passphrase: ")? != first {
        return Err(CliError::local("BadPassphrase", "passphrases differ"));
    }
    Ok(first)
}

fn new_wallet(path: &Path, iterations: u32, force: bool) -> Result<Value, CliError> {
    if path.exists() && !force {
        return Err(CliError::local(
            "WalletExists",
            format!("{} exists; pass --force to replace it", path.display()),
        ));
    }
    if iterations == 0 {
        return Err(CliError::local("WalletError", "iterations must be positive"));
    }
    let pass = passphrase(true)?;
    let key = KeyPair::generate(None).map_err(|e| CliError::local("WalletError", e.to_string()))?;
    let wallet = WalletFile::seal(&key, &pass, iterations);
    wallet.save(path)?;
    Ok(json!({ "address": wallet.address, "public_key_hex": wallet.public_key_hex, "path": path }))
}

fn submit(node: &NodeClient, wallet_path: &Path, payload: Payload) -> Result<Value, CliError> {
    let wallet = WalletFile::load(wallet_path)?;
    let key = wallet.unlock(&passphrase(false)?)?;
    let nonce = node.next_nonce(&key.address().to_string())?;
    let tx = Transaction::signed(&key, nonce, payload);
    let body = serde_json::to_value(&tx).expect("transactions serialize");
    node.post("/tx", &body)
}

fn load_config(path: &Path) -> Result<NodeConfig, CliError> {
    NodeConfig::load(path).map_err(|e| CliError::local("ConfigError", format!("{}: {e}", path.display())))
}

fn load_local_chain(path: &Path) -> Result<rentchain_core::Chain, CliError> {
    let cfg = load_config(path)?;
    load_chain(&cfg.data_dir, cfg.chain, cfg.genesis).map_err(|e| match e {
        StoreError::Invalid { height, source } => {
            CliError::Chain(json!({ "error": source.name(), "detail": source.to_string(), "height": height }))
        }
        StoreError::Io(e) => CliError::local("StorageError", e.to_string()),
    })
}

fn verify_chain(path: &Path) -> Result<Value, CliError> {
    let chain = load_local_chain(path)?;
    Ok(json!({
        "ok": true,
        "height": chain.height(),
        "tip": chain.tip().hash(),
        "state_digest": chain.state().digest(),
    }))
}

fn export_chain(path: &Path, out: Option<&Path>) -> Result<Value, CliError> {
    let chain = load_local_chain(path)?;
    let Some(out) = out else {
        let blocks: Vec<_> = chain.blocks().iter().map(BlockExport::new).collect();
        return Ok(json!({ "height": chain.height(), "blocks": blocks }));
    };
    let io = |e: std::io::Error| CliError::local("StorageError", format!("{}: {e}", out.display()));
    let file = std::fs::File::create(out).map_err(io)?;
    export_json(chain.blocks(), std::io::BufWriter::new(file)).map_err(io)?;
    Ok(json!({ "height": chain.height(), "blocks": chain.blocks().len(), "path": out }))
}

fn start_node(path: &Path) -> Result<Value, CliError> {
    let cfg = load_config(path)?;
    let runtime = tokio::runtime::Runtime::new().map_err(|e| CliError::local("StorageError", e.to_string()))?;
    runtime
        .block_on(rentchain_node::run(cfg))
        .map_err(|e| CliError::local("NodeError", e.to_string()))?;
    Ok(json!({ "stopped": true }))
}
