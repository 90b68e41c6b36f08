//! The single writer: owns the chain, the store, the mempool and the
//! pending state. Everything here runs on one thread.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::sync::Arc;

use rentchain_core::chain::mine_block;
use rentchain_core::store::{ChainStore, StoreError};
use rentchain_core::{
    Address, Block, Chain, ChainConfig, ChainError, ContractError, GenesisConfig, Hash32, KeyPair, Payload,
    Transaction, TxError, WorldState,
};
use serde::Serialize;
use thiserror::Error;

use crate::config::NodeConfig;
use crate::mempool::Mempool;

#[derive(Debug, Error)]
pub enum NodeError {
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error("chain: {0}")]
    Chain(#[from] ChainError),
    #[error("storage write failed: {0}")]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    Config(String),
}

/// Machine-readable refusal, surfaced verbatim in the API error envelope.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Rejection {
    pub error: String,
    pub detail: String,
    /// Units owed, for refusals a client can settle by paying.
    pub amount: Option<u64>,
}

impl Rejection {
    pub fn new(error: impl Into<String>, detail: impl Into<String>) -> Self {
        Rejection {
            error: error.into(),
            detail: detail.into(),
            amount: None,
        }
    }
}

impl From<TxError> for Rejection {
    fn from(e: TxError) -> Self {
        let amount = match &e {
            TxError::Contract(ContractError::PendingCharges(owed)) => Some(*owed),
            _ => None,
        };
        Rejection {
            amount,
            ..Rejection::new(e.name(), e.to_string())
        }
    }
}

impl From<NodeError> for Rejection {
    fn from(e: NodeError) -> Self {
        let name = match &e {
            NodeError::Store(_) | NodeError::Io(_) => "StorageError",
            NodeError::Chain(c) => c.name(),
            NodeError::Config(_) => "ConfigError",
        };
        Rejection::new(name, e.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Submitted {
    pub txid: Hash32,
    /// Height of the block that included it, when mined immediately.
    pub block_height: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BlockSummary {
    pub height: u64,
    pub hash: Hash32,
    pub prev_hash: Hash32,
    pub timestamp: u64,
    pub miner: Address,
    pub validator: Option<Address>,
    pub tx_count: usize,
    pub txids: Vec<Hash32>,
}

impl BlockSummary {
    pub fn of(block: &Block) -> Self {
        BlockSummary {
            height: block.height(),
            hash: block.hash(),
            prev_hash: block.header.prev_hash,
            timestamp: block.header.timestamp,
            miner: block.header.miner,
            validator: block.header.validator,
            tx_count: block.transactions.len(),
            txids: block.transactions.iter().map(Transaction::txid).collect(),
        }
    }
}

/// Immutable view of the node at one height.
#[derive(Debug, Clone)]
pub struct Snapshot {
    pub height: u64,
    pub tip_hash: Hash32,
    pub state: Arc<WorldState>,
    pub blocks: Vec<Arc<Block>>,
    pub tx_index: Arc<HashMap<Hash32, u64>>,
    pub pending_nonces: BTreeMap<Address, u64>,
    pub pending_txids: HashSet<Hash32>,
}

impl Snapshot {
    pub fn block_by_hash(&self, hash: &Hash32) -> Option<&Arc<Block>> {
        self.blocks.iter().find(|b| b.hash() == *hash)
    }
}

pub struct NodeCore {
    chain: Chain,
    store: Option<ChainStore>,
    mempool: Mempool,
    pending: WorldState,
    admin: Option<KeyPair>,
    auto_interval: u64,
    miner: Address,
    blocks: Vec<Arc<Block>>,
    tx_index: Arc<HashMap<Hash32, u64>>,
}

impl NodeCore {
    /// Opens the data directory and replays whatever it holds.
    pub fn open(config: &NodeConfig, admin: Option<KeyPair>) -> Result<Self, NodeError> {
        let (store, chain) = ChainStore::open(&config.data_dir, config.chain.clone(), config.genesis.clone())?;
        Self::build(
            chain,
            Some(store),
            admin,
            config.auto_mine_interval,
            config.miner_address(),
        )
    }

    /// A node without persistence.
    pub fn in_memory(
        chain: ChainConfig,
        genesis: GenesisConfig,
        admin: Option<KeyPair>,
        auto_interval: u64,
        miner: Address,
    ) -> Result<Self, NodeError> {
        Self::build(Chain::new(chain, genesis), None, admin, auto_interval, miner)
    }

    fn build(
        chain: Chain,
        store: Option<ChainStore>,
        admin: Option<KeyPair>,
        auto_interval: u64,
        miner: Address,
    ) -> Result<Self, NodeError> {
        if auto_interval > 0 {
            match &admin {
                None => return Err(NodeError::Config("automatic day ticks need the admin wallet".into())),
                Some(k) if k.address() != chain.genesis().admin => {
                    return Err(NodeError::Config(
                        "admin wallet does not match the genesis admin".into(),
                    ))
                }
                Some(_) => {}
            }
        }
        let mut tx_index = HashMap::new();
        for b in chain.blocks() {
            for tx in &b.transactions {
                tx_index.insert(tx.txid(), b.height());
            }
        }
        Ok(NodeCore {
            pending: chain.state().clone(),
            blocks: chain.blocks().iter().cloned().map(Arc::new).collect(),
            chain,
            store,
            mempool: Mempool::default(),
            admin,
            auto_interval,
            miner,
            tx_index: Arc::new(tx_index),
        })
    }

    pub fn chain(&self) -> &Chain {
        &self.chain
    }

    pub fn mempool_len(&self) -> usize {
        self.mempool.len()
    }

    /// Admits `tx` if it applies on top of the pending state.
    pub fn submit(&mut self, tx: Transaction) -> Result<Submitted, Rejection> {
        let txid = tx.txid();
        if self.mempool.contains_txid(&txid) || self.tx_index.contains_key(&txid) {
            return Err(Rejection::new("DuplicateTx", format!("{txid} already known")));
        }
        // apply_transaction leaves the state untouched on error
        self.pending.apply_transaction(&tx, self.chain.height() + 1)?;
        self.mempool.push(tx);
        let block_height = if self.chain.config().instant_mine {
            Some(self.mine_pending().map_err(Rejection::from)?.height)
        } else {
            None
        };
        Ok(Submitted { txid, block_height })
    }

    fn tick_due(&self, height: u64) -> bool {
        self.auto_interval > 0 && height.is_multiple_of(self.auto_interval)
    }

    /// Mines every pending transaction into one block (possibly empty).
    pub fn mine_pending(&mut self) -> Result<BlockSummary, NodeError> {
        let result = self.try_mine();
        if result.is_err() {
            self.pending = self.chain.state().clone();
        }
        result
    }

    fn try_mine(&mut self) -> Result<BlockSummary, NodeError> {
        let height = self.chain.height() + 1;
        let mut scratch = self.chain.state().clone();
        let mut txs = Vec::with_capacity(self.mempool.len() + 1);
        for tx in self.mempool.drain() {
            match scratch.apply_transaction(&tx, height) {
                Ok(()) => txs.push(tx),
                Err(e) => tracing::warn!(txid = %tx.txid(), reason = %e, "dropping invalidated transaction"),
            }
        }
        if self.tick_due(height) {
            let admin = self.admin.as_ref().expect("checked at startup");
            let nonce = scratch.account(&admin.address()).nonce + 1;
            txs.push(Transaction::signed(admin, nonce, Payload::AdvanceDay {}));
        }

        let timestamp = self.chain.tip().header.timestamp + 1;
        let (block, _) = mine_block(
            self.chain.tip(),
            self.chain.state(),
            txs,
            self.chain.config(),
            self.miner,
            timestamp,
        )?;
        if let Some(store) = &mut self.store {
            store.append(&block)?;
        }
        self.chain
            .append_block(block.clone())
            .expect("freshly mined block extends the tip");

        let index = Arc::make_mut(&mut self.tx_index);
        for tx in &block.transactions {
            index.insert(tx.txid(), block.height());
        }
        let summary = BlockSummary::of(&block);
        self.blocks.push(Arc::new(block));
        self.pending = self.chain.state().clone();
        tracing::info!(height = summary.height, txs = summary.tx_count, "mined block");
        Ok(summary)
    }

    pub fn snapshot(&self) -> Snapshot {
        Snapshot {
            height: self.chain.height(),
            tip_hash: self.chain.tip().hash(),
            state: Arc::new(self.chain.state().clone()),
            blocks: self.blocks.clone(),
            tx_index: Arc::clone(&self.tx_index),
            pending_nonces: self.mempool.pending_nonces(),
            pending_txids: self.mempool.txids().into_iter().collect(),
        }
    }
}
