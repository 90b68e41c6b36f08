//! Append-only chain file: one `u32` big-endian length prefix followed by the
//! canonical block bytes, per block, in height order.
//!
//! A record cut short at the end of the file is the trace of a crash during
//! `append`; it was never acknowledged, so `open` drops it. Any complete
//! record that fails to decode or validate makes the whole file unloadable.

use std::fs::{self, File, OpenOptions};
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use thiserror::Error;

use crate::chain::{validate_encoded_chain, Block, Chain, ChainConfig, ChainError, ChainVerdict};
use crate::codec::{Decode, Encode};
use crate::hash::Hash32;
use crate::state::GenesisConfig;
use crate::tx::Transaction;

pub const CHAIN_FILE: &str = "chain.dat";

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("chain store io: {0}")]
    Io(#[from] io::Error),
    #[error("stored chain rejected at height {height}: {source}")]
    Invalid { height: u64, source: ChainError },
}

/// Raw records plus the number of trailing bytes that formed no full record.
#[derive(Debug, Default)]
pub struct RawChain {
    pub records: Vec<Vec<u8>>,
    pub torn_tail: usize,
}

pub fn read_records(path: &Path) -> io::Result<RawChain> {
    let mut buf = Vec::new();
    match File::open(path) {
        Ok(mut f) => {
            f.read_to_end(&mut buf)?;
        }
        Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(RawChain::default()),
        Err(e) => return Err(e),
    }
    let mut records = Vec::new();
    let mut pos = 0usize;
    while buf.len() - pos >= 4 {
        let len = u32::from_be_bytes(buf[pos..pos + 4].try_into().expect("4 bytes")) as usize;
        if buf.len() - pos - 4 < len {
            break;
        }
        records.push(buf[pos + 4..pos + 4 + len].to_vec());
        pos += 4 + len;
    }
    Ok(RawChain {
        records,
        torn_tail: buf.len() - pos,
    })
}

pub fn encode_record(block: &Block) -> Vec<u8> {
    let body = block.to_canonical_bytes();
    let mut out = Vec::with_capacity(body.len() + 4);
    out.extend_from_slice(&(body.len() as u32).to_be_bytes());
    out.extend_from_slice(&body);
    out
}

#[derive(Debug)]
pub struct ChainStore {
    path: PathBuf,
    file: File,
}

impl ChainStore {
    /// Opens (or initializes) the chain in `dir` and replays it.
    pub fn open(dir: &Path, config: ChainConfig, genesis: GenesisConfig) -> Result<(Self, Chain), StoreError> {
        fs::create_dir_all(dir)?;
        let path = dir.join(CHAIN_FILE);
        let raw = read_records(&path)?;
        let valid_len: u64 = raw.records.iter().map(|r| 4 + r.len() as u64).sum();

        let chain = chain_from_records(&raw.records, config, genesis)?;

        let file = OpenOptions::new()
            .create(true)
            .truncate(false)
            .read(true)
            .write(true)
            .open(&path)?;
        if raw.torn_tail > 0 {
            tracing::warn!(bytes = raw.torn_tail, "dropping incomplete trailing record");
            file.set_len(valid_len)?;
            file.sync_all()?;
        }
        let mut store = ChainStore { path, file };
        if raw.records.is_empty() {
            store.file.set_len(0)?;
            store.append(chain.tip())?;
        }
        Ok((store, chain))
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    /// Writes one record and syncs it to disk before returning.
    pub fn append(&mut self, block: &Block) -> io::Result<()> {
        use std::io::{Seek, SeekFrom};
        self.file.seek(SeekFrom::End(0))?;
        self.file.write_all(&encode_record(block))?;
        self.file.sync_data()
    }
}

/// Loads and validates the chain in `dir` without keeping a writer open.
pub fn load_chain(dir: &Path, config: ChainConfig, genesis: GenesisConfig) -> Result<Chain, StoreError> {
    let raw = read_records(&dir.join(CHAIN_FILE))?;
    chain_from_records(&raw.records, config, genesis)
}

fn chain_from_records(records: &[Vec<u8>], config: ChainConfig, genesis: GenesisConfig) -> Result<Chain, StoreError> {
    if records.is_empty() {
        return Ok(Chain::new(config, genesis));
    }
    if let ChainVerdict::Invalid {
        first_bad_height,
        error,
    } = validate_encoded_chain(&config, &genesis, records)
    {
        return Err(StoreError::Invalid {
            height: first_bad_height,
            source: error,
        });
    }
    let blocks = records
        .iter()
        .map(|r| Block::from_canonical_bytes(r).expect("validated above"))
        .collect();
    Chain::from_blocks(config, genesis, blocks).map_err(|e| StoreError::Invalid { height: 0, source: e })
}

/// Human-readable form of a block used by the JSON export.
#[derive(Debug, Serialize)]
pub struct BlockExport<'a> {
    pub hash: Hash32,
    pub header: &'a crate::chain::BlockHeader,
    pub transactions: Vec<TxExport<'a>>,
}

#[derive(Debug, Serialize)]
pub struct TxExport<'a> {
    pub txid: Hash32,
    #[serde(flatten)]
    pub tx: &'a Transaction,
}

impl<'a> BlockExport<'a> {
    pub fn new(block: &'a Block) -> Self {
        BlockExport {
            hash: block.hash(),
            header: &block.header,
            transactions: block
                .transactions
                .iter()
                .map(|tx| TxExport { txid: tx.txid(), tx })
                .collect(),
        }
    }
}

/// Writes one JSON object per block, one per line.
pub fn export_json<W: Write>(blocks: &[Block], mut out: W) -> io::Result<()> {
    for block in blocks {
        serde_json::to_writer(&mut out, &BlockExport::new(block))?;
        out.write_all(b"\n")?;
    }
    out.flush()
}
