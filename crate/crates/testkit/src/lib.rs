//! Test support: fixed actors, nonce bookkeeping, randomized rental
//! workloads and reference models that recompute expected results without
//! going through the contract engine.

pub mod oracle;
pub mod workload;

use std::collections::{BTreeMap, HashMap};

use rentchain_core::{Address, ChainConfig, ConsensusMode, GenesisConfig, KeyPair, Payload, Transaction};

pub const LICENSE: &str = "12345678Z";

pub fn key(n: u8) -> KeyPair {
    KeyPair::generate(Some(&[n; 32])).expect("32-byte seed")
}

pub fn plate(i: usize) -> String {
    format!("{:04}-ABC", 1000 + i)
}

pub struct Actors {
    pub admin: KeyPair,
    pub owner: KeyPair,
    pub clients: Vec<KeyPair>,
    pub miner: Address,
}

impl Actors {
    pub fn new(n_clients: usize) -> Self {
        assert!(n_clients < 80);
        Actors {
            admin: key(1),
            owner: key(2),
            clients: (0..n_clients).map(|i| key(10 + i as u8)).collect(),
            miner: key(99).address(),
        }
    }

    pub fn genesis(&self, client_balance: u64, surcharge_fee: u64) -> GenesisConfig {
        let mut allocations: BTreeMap<Address, u64> =
            self.clients.iter().map(|k| (k.address(), client_balance)).collect();
        allocations.insert(self.admin.address(), 1_000);
        allocations.insert(self.owner.address(), 1_000);
        GenesisConfig {
            timestamp: 0,
            allocations,
            admin: self.admin.address(),
            fleet_owner: self.owner.address(),
            surcharge_fee,
        }
    }
}

pub fn pow(difficulty: u8, block_reward: u64) -> ChainConfig {
    ChainConfig {
        consensus_mode: ConsensusMode::PoW,
        difficulty,
        block_reward,
        instant_mine: true,
    }
}

/// Hands out consecutive nonces per signer.
#[derive(Default)]
pub struct Signer {
    nonces: HashMap<Address, u64>,
}

impl Signer {
    pub fn tx(&mut self, key: &KeyPair, payload: Payload) -> Transaction {
        let n = self.nonces.entry(key.address()).or_insert(0);
        *n += 1;
        Transaction::signed(key, *n, payload)
    }

    /// Forget the last nonce handed to `addr`, after its transaction failed.
    pub fn rewind(&mut self, addr: &Address) {
        if let Some(n) = self.nonces.get_mut(addr) {
            *n -= 1;
        }
    }
}
