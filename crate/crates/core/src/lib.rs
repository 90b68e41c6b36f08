//! Core of rentchain: a small account-based ledger whose state includes a
//! driving-license registry and a vehicle rental escrow.

pub mod chain;
pub mod codec;
pub mod contract;
pub mod crypto;
pub mod hash;
pub mod license;
pub mod state;
pub mod store;
pub mod tx;
pub mod wallet;

pub use chain::{
    block_hash, mine_block, replay_state, select_validator, validate_chain, Block, BlockHeader, Chain, ChainConfig,
    ChainError, ChainVerdict, ConsensusMode,
};
pub use contract::{ContractError, ContractState, LicenseRecord, RentalAgreement, Vehicle, VehicleStatus};
pub use crypto::{Address, KeyPair, PublicKey, Signature};
pub use hash::{sha256, Hash32};
pub use state::{Account, GenesisConfig, TxError, WorldState};
pub use tx::{Payload, Transaction};
