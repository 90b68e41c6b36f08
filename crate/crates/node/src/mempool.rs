use std::collections::{BTreeMap, HashSet};

use rentchain_core::{Address, Hash32, Transaction};

/// Verified transactions awaiting a block, in arrival order.
///
/// Arrival order respects each sender's nonce order because a transaction is
/// only admitted when it applies on top of everything already pending.
#[derive(Debug, Default)]
pub struct Mempool {
    txs: Vec<Transaction>,
    keys: HashSet<(Address, u64)>,
    txids: HashSet<Hash32>,
}

impl Mempool {
    pub fn push(&mut self, tx: Transaction) {
        self.keys.insert((tx.from, tx.nonce));
        self.txids.insert(tx.txid());
        self.txs.push(tx);
    }

    pub fn contains_key(&self, sender: &Address, nonce: u64) -> bool {
        self.keys.contains(&(*sender, nonce))
    }

    pub fn contains_txid(&self, txid: &Hash32) -> bool {
        self.txids.contains(txid)
    }

    pub fn len(&self) -> usize {
        self.txs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.txs.is_empty()
    }

    pub fn txids(&self) -> Vec<Hash32> {
        self.txs.iter().map(Transaction::txid).collect()
    }

    /// Highest pending nonce per sender.
    pub fn pending_nonces(&self) -> BTreeMap<Address, u64> {
        let mut out = BTreeMap::new();
        for tx in &self.txs {
            let n = out.entry(tx.from).or_insert(0);
            *n = (*n).max(tx.nonce);
        }
        out
    }

    pub fn drain(&mut self) -> Vec<Transaction> {
        self.keys.clear();
        self.txids.clear();
        std::mem::take(&mut self.txs)
    }
}
