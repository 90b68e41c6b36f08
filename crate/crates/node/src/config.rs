use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use rentchain_core::{Address, ChainConfig, GenesisConfig};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const ENV_PORT: &str = "RENTCHAIN_PORT";
pub const ENV_DATA_DIR: &str = "RENTCHAIN_DATA_DIR";
/// Passphrase for the node-held admin wallet used by automatic day ticks.
pub const ENV_ADMIN_PASSPHRASE: &str = "RENTCHAIN_ADMIN_PASSPHRASE";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config io: {0}")]
    Io(#[from] std::io::Error),
    #[error("config json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeConfig {
    pub listen: SocketAddr,
    pub data_dir: PathBuf,
    pub chain: ChainConfig,
    pub genesis: GenesisConfig,
    /// Blocks between automatic AdvanceDay ticks; 0 disables them.
    #[serde(default)]
    pub auto_mine_interval: u64,
    /// Wallet file holding the admin key, required when auto ticks are on.
    #[serde(default)]
    pub admin_wallet: Option<PathBuf>,
    /// Reward recipient in PoW mode; defaults to the admin address.
    #[serde(default)]
    pub miner: Option<Address>,
}

impl NodeConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let raw = std::fs::read_to_string(path)?;
        let mut cfg: NodeConfig = serde_json::from_str(&raw)?;
        if let Some(dir) = cfg.data_dir.is_relative().then(|| path.parent()).flatten() {
            cfg.data_dir = dir.join(&cfg.data_dir);
        }
        if let Some(wallet) = &cfg.admin_wallet {
            if wallet.is_relative() {
                if let Some(dir) = path.parent() {
                    cfg.admin_wallet = Some(dir.join(wallet));
                }
            }
        }
        cfg.apply_env(|k| std::env::var(k).ok())?;
        Ok(cfg)
    }

    /// Port and data directory may be overridden from the environment.
    pub fn apply_env(&mut self, get: impl Fn(&str) -> Option<String>) -> Result<(), ConfigError> {
        if let Some(port) = get(ENV_PORT) {
            let port: u16 = port
                .parse()
                .map_err(|_| ConfigError::Invalid(format!("{ENV_PORT}={port} is not a port")))?;
            self.listen.set_port(port);
        }
        if let Some(dir) = get(ENV_DATA_DIR) {
            self.data_dir = PathBuf::from(dir);
        }
        Ok(())
    }

    pub fn miner_address(&self) -> Address {
        self.miner.unwrap_or(self.genesis.admin)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> NodeConfig {
        serde_json::from_value(serde_json::json!({
            "listen": "127.0.0.1:8545",
            "data_dir": "data",
            "chain": {"consensus_mode": "PoW", "difficulty": 0, "block_reward": 0, "instant_mine": true},
            "genesis": {
                "allocations": {},
                "admin": "0x0101010101010101010101010101010101010101",
                "fleet_owner": "0x0202020202020202020202020202020202020202",
                "surcharge_fee": 1
            }
        }))
        .unwrap()
    }

    #[test]
    fn env_overrides_port_and_dir() {
        let mut cfg = sample();
        cfg.apply_env(|k| match k {
            ENV_PORT => Some("9000".into()),
            ENV_DATA_DIR => Some("/tmp/x".into()),
            _ => None,
        })
        .unwrap();
        assert_eq!(cfg.listen.port(), 9000);
        assert_eq!(cfg.data_dir, PathBuf::from("/tmp/x"));
        assert_eq!(cfg.auto_mine_interval, 0);
        assert_eq!(cfg.miner_address(), cfg.genesis.admin);
    }

    #[test]
    fn bad_port_is_rejected() {
        let mut cfg = sample();
        assert!(cfg.apply_env(|k| (k == ENV_PORT).then(|| "http".into())).is_err());
    }
}
