//! Hash-linked blocks, proof-of-work mining, stake-weighted validator
//! selection and full-chain validation.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::codec::{Decode, DecodeError, Encode, Reader, Writer};
use crate::crypto::Address;
use crate::hash::{sha256, Hash32};
use crate::state::{GenesisConfig, TxError, WorldState};
use crate::tx::Transaction;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ConsensusMode {
    PoW,
    PoS,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChainConfig {
    pub consensus_mode: ConsensusMode,
    /// Required leading zero bits of the block hash (PoW only).
    pub difficulty: u8,
    pub block_reward: u64,
    /// Node mines a block as soon as a transaction is accepted.
    #[serde(default)]
    pub instant_mine: bool,
}

impl Default for ChainConfig {
    fn default() -> Self {
        ChainConfig {
            consensus_mode: ConsensusMode::PoW,
            difficulty: 0,
            block_reward: 0,
            instant_mine: true,
        }
    }
}

impl ChainConfig {
    /// Difficulty actually written into non-genesis headers.
    pub fn header_difficulty(&self) -> u8 {
        match self.consensus_mode {
            ConsensusMode::PoW => self.difficulty,
            ConsensusMode::PoS => 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockHeader {
    pub height: u64,
    pub prev_hash: Hash32,
    pub tx_root: Hash32,
    pub timestamp: u64,
    pub difficulty: u8,
    /// Receives the block reward.
    pub miner: Address,
    pub validator: Option<Address>,
    pub nonce: u64,
}

/// Offset of the nonce from the end of an encoded header.
const NONCE_LEN: usize = 8;

impl Encode for BlockHeader {
    fn encode_to(&self, w: &mut Writer) {
        w.u64(self.height)
            .fixed(&self.prev_hash.0)
            .fixed(&self.tx_root.0)
            .u64(self.timestamp)
            .u8(self.difficulty)
            .fixed(&self.miner.0);
        match &self.validator {
            None => w.u8(0),
            Some(v) => w.u8(1).fixed(&v.0),
        };
        w.u64(self.nonce);
    }
}

impl Decode for BlockHeader {
    fn decode_from(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        Ok(BlockHeader {
            height: r.u64()?,
            prev_hash: Hash32(r.array()?),
            tx_root: Hash32(r.array()?),
            timestamp: r.u64()?,
            difficulty: r.u8()?,
            miner: Address(r.array()?),
            validator: match r.u8()? {
                0 => None,
                1 => Some(Address(r.array()?)),
                tag => return Err(DecodeError::BadTag { what: "validator", tag }),
            },
            nonce: r.u64()?,
        })
    }
}

/// SHA-256 over the canonical header bytes.
pub fn block_hash(header: &BlockHeader) -> Hash32 {
    sha256(&header.to_canonical_bytes())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Block {
    pub header: BlockHeader,
    pub transactions: Vec<Transaction>,
}

impl Block {
    pub fn hash(&self) -> Hash32 {
        block_hash(&self.header)
    }

    pub fn height(&self) -> u64 {
        self.header.height
    }

    pub fn genesis(config: &ChainConfig, genesis: &GenesisConfig) -> Block {
        Block {
            header: BlockHeader {
                height: 0,
                prev_hash: Hash32::ZERO,
                tx_root: genesis_commitment(config, genesis),
                timestamp: genesis.timestamp,
                difficulty: 0,
                miner: Address([0u8; 20]),
                validator: None,
                nonce: 0,
            },
            transactions: Vec::new(),
        }
    }
}

impl Encode for Block {
    fn encode_to(&self, w: &mut Writer) {
        self.header.encode_to(w);
        w.u32(self.transactions.len() as u32);
        for tx in &self.transactions {
            w.bytes(&tx.to_canonical_bytes());
        }
    }
}

impl Decode for Block {
    fn decode_from(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        let header = BlockHeader::decode_from(r)?;
        let count = r.u32()? as usize;
        let mut transactions = Vec::with_capacity(count.min(1024));
        for _ in 0..count {
            transactions.push(Transaction::from_canonical_bytes(r.bytes()?)?);
        }
        Ok(Block { header, transactions })
    }
}

/// Digest over the ordered, length-prefixed canonical transactions.
pub fn tx_root(txs: &[Transaction]) -> Hash32 {
    let mut w = Writer::default();
    w.u32(txs.len() as u32);
    for tx in txs {
        w.bytes(&tx.to_canonical_bytes());
    }
    sha256(&w.into_bytes())
}

/// The genesis block's `tx_root` commits to the consensus parameters and the
/// initial allocations, so a data directory cannot be reopened under a
/// different configuration.
pub fn genesis_commitment(config: &ChainConfig, genesis: &GenesisConfig) -> Hash32 {
    let mut w = Writer::default();
    w.str("rentchain/genesis");
    let mode = match config.consensus_mode {
        ConsensusMode::PoW => 0,
        ConsensusMode::PoS => 1,
    };
    w.u8(mode).u8(config.difficulty).u64(config.block_reward);
    genesis.encode_to(&mut w);
    sha256(&w.into_bytes())
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ChainError {
    #[error("prev_hash does not match the tip")]
    BadPrevHash,
    #[error("height {got} does not follow parent (expected {expected})")]
    BadHeight { expected: u64, got: u64 },
    #[error("timestamp {got} is earlier than parent {parent}")]
    BadTimestamp { parent: u64, got: u64 },
    #[error("block does not carry a valid proof: {0}")]
    BadProof(&'static str),
    #[error("tx_root does not match the transactions")]
    BadTxRoot,
    #[error("transaction {index} invalid: {reason}")]
    TxInvalid { index: usize, reason: TxError },
    #[error("genesis block does not match the configuration")]
    BadGenesis,
    #[error("no account holds stake")]
    NoStake,
    #[error("nonce space exhausted")]
    NonceExhausted,
    #[error("block {height} failed to decode: {source}")]
    Decode { height: u64, source: DecodeError },
    #[error("chain invalid at height {height}: {source}")]
    ChainInvalid { height: u64, source: Box<ChainError> },
}

impl ChainError {
    pub fn name(&self) -> &'static str {
        match self {
            ChainError::BadPrevHash => "BadPrevHash",
            ChainError::BadHeight { .. } => "BadHeight",
            ChainError::BadTimestamp { .. } => "BadTimestamp",
            ChainError::BadProof(_) => "BadProof",
            ChainError::BadTxRoot => "BadTxRoot",
            ChainError::TxInvalid { .. } => "TxInvalid",
            ChainError::BadGenesis => "BadGenesis",
            ChainError::NoStake => "NoStake",
            ChainError::NonceExhausted => "NonceExhausted",
            ChainError::Decode { .. } => "Decode",
            ChainError::ChainInvalid { .. } => "ChainInvalid",
        }
    }
}

/// Picks an address with probability proportional to its stake.
///
/// The seed, read as a 256-bit big-endian integer, is reduced modulo the total
/// stake and the result walks the cumulative stakes in address order.
pub fn select_validator(stakes: &BTreeMap<Address, u64>, seed: &Hash32) -> Result<Address, ChainError> {
    let total: u128 = stakes.values().map(|s| u128::from(*s)).sum();
    if total == 0 {
        return Err(ChainError::NoStake);
    }
    let ticket = seed.0.iter().fold(0u128, |acc, b| (acc * 256 + u128::from(*b)) % total);
    let mut cumulative = 0u128;
    for (addr, stake) in stakes {
        cumulative += u128::from(*stake);
        if ticket < cumulative {
            return Ok(*addr);
        }
    }
    unreachable!("ticket is below the total stake")
}

/// Staking weights: every balance except the keyless escrow account.
pub fn stakes_of(state: &WorldState) -> BTreeMap<Address, u64> {
    state
        .accounts
        .iter()
        .filter(|(addr, acct)| **addr != state.contract.escrow_address && acct.balance > 0)
        .map(|(addr, acct)| (*addr, acct.balance))
        .collect()
}

fn apply_body(
    parent_state: &WorldState,
    header: &BlockHeader,
    txs: &[Transaction],
    config: &ChainConfig,
) -> Result<WorldState, ChainError> {
    let mut state = parent_state.clone();
    state
        .apply_coinbase(header.miner, config.block_reward)
        .map_err(|e| ChainError::TxInvalid {
            index: 0,
            reason: e.into(),
        })?;
    for (index, tx) in txs.iter().enumerate() {
        state
            .apply_transaction(tx, header.height)
            .map_err(|reason| ChainError::TxInvalid { index, reason })?;
    }
    Ok(state)
}

/// Builds the next block on `parent` and searches nonces from 0 upward until
/// the header meets the difficulty target. Under PoS the reward goes to the
/// selected validator and `miner` is ignored.
pub fn mine_block(
    parent: &Block,
    parent_state: &WorldState,
    txs: Vec<Transaction>,
    config: &ChainConfig,
    miner: Address,
    timestamp: u64,
) -> Result<(Block, WorldState), ChainError> {
    let parent_hash = parent.hash();
    let (miner, validator) = match config.consensus_mode {
        ConsensusMode::PoW => (miner, None),
        ConsensusMode::PoS => {
            let chosen = select_validator(&stakes_of(parent_state), &parent_hash)?;
            (chosen, Some(chosen))
        }
    };
    let mut header = BlockHeader {
        height: parent.height() + 1,
        prev_hash: parent_hash,
        tx_root: tx_root(&txs),
        timestamp: timestamp.max(parent.header.timestamp),
        difficulty: config.header_difficulty(),
        miner,
        validator,
        nonce: 0,
    };
    let state = apply_body(parent_state, &header, &txs, config)?;

    if config.consensus_mode == ConsensusMode::PoW {
        header.nonce = search_nonce(&header)?;
    }
    Ok((
        Block {
            header,
            transactions: txs,
        },
        state,
    ))
}

fn search_nonce(header: &BlockHeader) -> Result<u64, ChainError> {
    let mut bytes = header.to_canonical_bytes();
    let at = bytes.len() - NONCE_LEN;
    for nonce in 0..=u64::MAX {
        bytes[at..].copy_from_slice(&nonce.to_be_bytes());
        if sha256(&bytes).meets_difficulty(header.difficulty) {
            return Ok(nonce);
        }
    }
    Err(ChainError::NonceExhausted)
}

/// Checks `block` as the successor of `parent` and returns the new state.
pub fn check_block(
    parent: &Block,
    parent_state: &WorldState,
    block: &Block,
    config: &ChainConfig,
) -> Result<WorldState, ChainError> {
    let h = &block.header;
    let expected = parent.height() + 1;
    if h.height != expected {
        return Err(ChainError::BadHeight {
            expected,
            got: h.height,
        });
    }
    let parent_hash = parent.hash();
    if h.prev_hash != parent_hash {
        return Err(ChainError::BadPrevHash);
    }
    if h.timestamp < parent.header.timestamp {
        return Err(ChainError::BadTimestamp {
            parent: parent.header.timestamp,
            got: h.timestamp,
        });
    }
    if h.difficulty != config.header_difficulty() {
        return Err(ChainError::BadProof("difficulty differs from configuration"));
    }
    match config.consensus_mode {
        ConsensusMode::PoW => {
            if h.validator.is_some() {
                return Err(ChainError::BadProof("validator set in PoW mode"));
            }
            if !block.hash().meets_difficulty(h.difficulty) {
                return Err(ChainError::BadProof("hash above target"));
            }
        }
        ConsensusMode::PoS => {
            let chosen = select_validator(&stakes_of(parent_state), &parent_hash)?;
            if h.validator != Some(chosen) || h.miner != chosen {
                return Err(ChainError::BadProof("validator is not the selected staker"));
            }
            if h.nonce != 0 {
                return Err(ChainError::BadProof("nonce must be zero in PoS mode"));
            }
        }
    }
    if h.tx_root != tx_root(&block.transactions) {
        return Err(ChainError::BadTxRoot);
    }
    apply_body(parent_state, h, &block.transactions, config)
}

/// Outcome of a full replay.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ChainVerdict {
    Ok,
    Invalid { first_bad_height: u64, error: ChainError },
}

impl ChainVerdict {
    pub fn is_ok(&self) -> bool {
        matches!(self, ChainVerdict::Ok)
    }

    pub fn first_bad_height(&self) -> Option<u64> {
        match self {
            ChainVerdict::Ok => None,
            ChainVerdict::Invalid { first_bad_height, .. } => Some(*first_bad_height),
        }
    }
}

/// Replays from genesis and returns the final state, or the lowest height at
/// which integrity fails.
///
/// A broken link between heights `h` and `h + 1` is reported at `h`: the
/// child's `prev_hash` is a commitment to the parent, and either side of the
/// link may be the altered one.
fn replay(config: &ChainConfig, genesis: &GenesisConfig, blocks: &[Block]) -> Result<WorldState, (u64, ChainError)> {
    let Some(first) = blocks.first() else {
        return Err((0, ChainError::BadGenesis));
    };
    if *first != Block::genesis(config, genesis) {
        return Err((0, ChainError::BadGenesis));
    }
    let mut state = WorldState::from_genesis(genesis);
    for pair in blocks.windows(2) {
        let (parent, block) = (&pair[0], &pair[1]);
        state = match check_block(parent, &state, block, config) {
            Ok(next) => next,
            Err(ChainError::BadPrevHash) => return Err((parent.height(), ChainError::BadPrevHash)),
            Err(e) => return Err((parent.height() + 1, e)),
        };
    }
    Ok(state)
}

pub fn validate_chain(config: &ChainConfig, genesis: &GenesisConfig, blocks: &[Block]) -> ChainVerdict {
    match replay(config, genesis, blocks) {
        Ok(_) => ChainVerdict::Ok,
        Err((first_bad_height, error)) => ChainVerdict::Invalid {
            first_bad_height,
            error,
        },
    }
}

/// Same as [`validate_chain`] over raw encoded blocks; a record that fails to
/// decode is reported at its own position.
pub fn validate_encoded_chain(config: &ChainConfig, genesis: &GenesisConfig, records: &[Vec<u8>]) -> ChainVerdict {
    let mut blocks = Vec::with_capacity(records.len());
    for (i, rec) in records.iter().enumerate() {
        match Block::from_canonical_bytes(rec) {
            Ok(b) => blocks.push(b),
            Err(source) => {
                let height = i as u64;
                // An earlier block may still be the first failure.
                return match validate_chain(config, genesis, &blocks) {
                    ChainVerdict::Invalid {
                        first_bad_height,
                        error,
                    } if !blocks.is_empty() => ChainVerdict::Invalid {
                        first_bad_height,
                        error,
                    },
                    _ => ChainVerdict::Invalid {
                        first_bad_height: height,
                        error: ChainError::Decode { height, source },
                    },
                };
            }
        }
    }
    validate_chain(config, genesis, &blocks)
}

pub fn replay_state(config: &ChainConfig, genesis: &GenesisConfig, blocks: &[Block]) -> Result<WorldState, ChainError> {
    replay(config, genesis, blocks).map_err(|(height, e)| ChainError::ChainInvalid {
        height,
        source: Box::new(e),
    })
}

/// An in-memory chain with its incrementally maintained state.
#[derive(Debug, Clone)]
pub struct Chain {
    config: ChainConfig,
    genesis: GenesisConfig,
    blocks: Vec<Block>,
    state: WorldState,
}

impl Chain {
    pub fn new(config: ChainConfig, genesis: GenesisConfig) -> Self {
        let block = Block::genesis(&config, &genesis);
        let state = WorldState::from_genesis(&genesis);
        Chain {
            config,
            genesis,
            blocks: vec![block],
            state,
        }
    }

    /// Rebuilds a chain from stored blocks, validating every one.
    pub fn from_blocks(config: ChainConfig, genesis: GenesisConfig, blocks: Vec<Block>) -> Result<Self, ChainError> {
        let state = replay_state(&config, &genesis, &blocks)?;
        Ok(Chain {
            config,
            genesis,
            blocks,
            state,
        })
    }

    pub fn config(&self) -> &ChainConfig {
        &self.config
    }

    pub fn genesis(&self) -> &GenesisConfig {
        &self.genesis
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn tip(&self) -> &Block {
        self.blocks.last().expect("chain always holds genesis")
    }

    pub fn height(&self) -> u64 {
        self.tip().height()
    }

    pub fn state(&self) -> &WorldState {
        &self.state
    }

    /// Accepts `block` only if every check passes; otherwise nothing changes.
    pub fn append_block(&mut self, block: Block) -> Result<(), ChainError> {
        let next = check_block(self.tip(), &self.state, &block, &self.config)?;
        self.blocks.push(block);
        self.state = next;
        Ok(())
    }

    /// Mines `txs` on the tip and appends the result.
    pub fn mine(&mut self, txs: Vec<Transaction>, miner: Address, timestamp: u64) -> Result<&Block, ChainError> {
        let (block, state) = mine_block(self.tip(), &self.state, txs, &self.config, miner, timestamp)?;
        self.blocks.push(block);
        self.state = state;
        Ok(self.tip())
    }
}
