//! Account balances plus contract storage, advanced only by transactions.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::codec::{Encode, Writer};
use crate::contract::{self, ContractError, ContractState};
use crate::crypto::Address;
use crate::hash::{sha256, Hash32};
use crate::tx::{Payload, Transaction};

/// Initial allocations and privileged addresses.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenesisConfig {
    #[serde(default)]
    pub timestamp: u64,
    pub allocations: BTreeMap<Address, u64>,
    pub admin: Address,
    pub fleet_owner: Address,
    #[serde(default)]
    pub surcharge_fee: u64,
}

impl Encode for GenesisConfig {
    fn encode_to(&self, w: &mut Writer) {
        w.u64(self.timestamp).u32(self.allocations.len() as u32);
        for (addr, amount) in &self.allocations {
            w.fixed(&addr.0).u64(*amount);
        }
        w.fixed(&self.admin.0)
            .fixed(&self.fleet_owner.0)
            .u64(self.surcharge_fee);
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Account {
    pub balance: u64,
    pub nonce: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TxError {
    #[error("signature does not verify for the sender")]
    BadSignature,
    #[error("expected nonce {expected}, got {got}")]
    BadNonce { expected: u64, got: u64 },
    #[error(transparent)]
    Contract(#[from] ContractError),
}

impl TxError {
    /// Stable machine-readable name used in API error envelopes.
    pub fn name(&self) -> &'static str {
        match self {
            TxError::BadSignature => "BadSignature",
            TxError::BadNonce { .. } => "BadNonce",
            TxError::Contract(e) => e.name(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorldState {
    pub accounts: BTreeMap<Address, Account>,
    pub contract: ContractState,
}

impl WorldState {
    pub fn from_genesis(genesis: &GenesisConfig) -> Self {
        let accounts = genesis
            .allocations
            .iter()
            .map(|(addr, balance)| {
                (
                    *addr,
                    Account {
                        balance: *balance,
                        nonce: 0,
                    },
                )
            })
            .collect();
        WorldState {
            accounts,
            contract: ContractState::new(genesis.admin, genesis.fleet_owner, genesis.surcharge_fee),
        }
    }

    pub fn account(&self, addr: &Address) -> Account {
        self.accounts.get(addr).copied().unwrap_or_default()
    }

    pub fn balance(&self, addr: &Address) -> u64 {
        self.account(addr).balance
    }

    pub fn escrow_balance(&self) -> u64 {
        self.balance(&self.contract.escrow_address)
    }

    /// Sum of every balance, escrow included.
    pub fn total_supply(&self) -> u128 {
        self.accounts.values().map(|a| u128::from(a.balance)).sum()
    }

    /// Escrow holds exactly the deposits and unpaid-out revenue of live rentals.
    pub fn escrow_backed(&self) -> bool {
        u128::from(self.escrow_balance()) == self.contract.escrow_liability()
    }

    pub(crate) fn credit(&mut self, addr: Address, amount: u64) -> Result<(), ContractError> {
        let acct = self.accounts.entry(addr).or_default();
        acct.balance = acct.balance.checked_add(amount).ok_or(ContractError::Overflow)?;
        Ok(())
    }

    /// Moves funds between accounts. Fails without side effects.
    pub(crate) fn transfer(&mut self, from: Address, to: Address, amount: u64) -> Result<(), ContractError> {
        if self.balance(&from) < amount {
            return Err(ContractError::InsufficientBalance {
                needed: amount,
                available: self.balance(&from),
            });
        }
        if from != to && self.balance(&to).checked_add(amount).is_none() {
            return Err(ContractError::Overflow);
        }
        self.accounts.entry(from).or_default().balance -= amount;
        self.credit(to, amount)
    }

    /// Block reward credit, applied before any transaction of the block.
    pub fn apply_coinbase(&mut self, miner: Address, reward: u64) -> Result<(), ContractError> {
        if reward == 0 {
            return Ok(());
        }
        self.credit(miner, reward)
    }

    /// Verifies, checks the nonce, and dispatches. On error the state is untouched.
    pub fn apply_transaction(&mut self, tx: &Transaction, height: u64) -> Result<(), TxError> {
        if !tx.verify() {
            return Err(TxError::BadSignature);
        }
        let expected = self.account(&tx.from).nonce + 1;
        if tx.nonce != expected {
            return Err(TxError::BadNonce {
                expected,
                got: tx.nonce,
            });
        }
        self.apply_payload(tx.from, &tx.payload, height)?;
        self.accounts.entry(tx.from).or_default().nonce = expected;
        Ok(())
    }

    /// Contract dispatch for an already authenticated sender.
    pub fn apply_payload(&mut self, sender: Address, payload: &Payload, height: u64) -> Result<(), ContractError> {
        match payload {
            Payload::Transfer { to, amount } => contract::transfer(self, sender, *to, *amount),
            Payload::AddLicense { license_id } => contract::add_license(self, sender, license_id, height),
            Payload::AddVehicle {
                vehicle_id,
                daily_price,
            } => contract::add_vehicle(self, sender, vehicle_id, *daily_price),
            Payload::RentCar {
                vehicle_id,
                license_id,
                deposit,
            } => contract::rent_car(self, sender, vehicle_id, license_id, *deposit),
            Payload::AddFunds { vehicle_id, amount } => contract::add_funds(self, sender, vehicle_id, *amount),
            Payload::ReturnCar { vehicle_id } => contract::return_car(self, sender, vehicle_id),
            Payload::AdvanceDay {} => contract::advance_day(self, sender),
        }
    }

    pub fn digest(&self) -> Hash32 {
        sha256(&self.to_canonical_bytes())
    }
}

impl Encode for WorldState {
    fn encode_to(&self, w: &mut Writer) {
        w.u32(self.accounts.len() as u32);
        for (addr, acct) in &self.accounts {
            w.fixed(&addr.0).u64(acct.balance).u64(acct.nonce);
        }
        self.contract.encode_to(w);
    }
}
