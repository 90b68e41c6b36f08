use serde::{Deserialize, Serialize};

use crate::codec::{Decode, DecodeError, Encode, Reader, Writer};
use crate::crypto::{Address, KeyPair, PublicKey, Signature};
use crate::hash::{sha256, Hash32};

/// Instruction carried by a transaction.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type")]
pub enum Payload {
    Transfer {
        to: Address,
        amount: u64,
    },
    AddLicense {
        license_id: String,
    },
    AddVehicle {
        vehicle_id: String,
        daily_price: u64,
    },
    RentCar {
        vehicle_id: String,
        license_id: String,
        deposit: u64,
    },
    AddFunds {
        vehicle_id: String,
        amount: u64,
    },
    ReturnCar {
        vehicle_id: String,
    },
    AdvanceDay {},
}

impl Payload {
    pub fn kind(&self) -> &'static str {
        match self {
            Payload::Transfer { .. } => "Transfer",
            Payload::AddLicense { .. } => "AddLicense",
            Payload::AddVehicle { .. } => "AddVehicle",
            Payload::RentCar { .. } => "RentCar",
            Payload::AddFunds { .. } => "AddFunds",
            Payload::ReturnCar { .. } => "ReturnCar",
            Payload::AdvanceDay {} => "AdvanceDay",
        }
    }
}

impl Encode for Payload {
    fn encode_to(&self, w: &mut Writer) {
        match self {
            Payload::Transfer { to, amount } => {
                w.u8(0).fixed(&to.0).u64(*amount);
            }
            Payload::AddLicense { license_id } => {
                w.u8(1).str(license_id);
            }
            Payload::AddVehicle {
                vehicle_id,
                daily_price,
            } => {
                w.u8(2).str(vehicle_id).u64(*daily_price);
            }
            Payload::RentCar {
                vehicle_id,
                license_id,
                deposit,
            } => {
                w.u8(3).str(vehicle_id).str(license_id).u64(*deposit);
            }
            Payload::AddFunds { vehicle_id, amount } => {
                w.u8(4).str(vehicle_id).u64(*amount);
            }
            Payload::ReturnCar { vehicle_id } => {
                w.u8(5).str(vehicle_id);
            }
            Payload::AdvanceDay {} => {
                w.u8(6);
            }
        }
    }
}

impl Decode for Payload {
    fn decode_from(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        Ok(match r.u8()? {
            0 => Payload::Transfer {
                to: Address(r.array()?),
                amount: r.u64()?,
            },
            1 => Payload::AddLicense {
                license_id: r.string()?,
            },
            2 => Payload::AddVehicle {
                vehicle_id: r.string()?,
                daily_price: r.u64()?,
            },
            3 => Payload::RentCar {
                vehicle_id: r.string()?,
                license_id: r.string()?,
                deposit: r.u64()?,
            },
            4 => Payload::AddFunds {
                vehicle_id: r.string()?,
                amount: r.u64()?,
            },
            5 => Payload::ReturnCar {
                vehicle_id: r.string()?,
            },
            6 => Payload::AdvanceDay {},
            tag => return Err(DecodeError::BadTag { what: "payload", tag }),
        })
    }
}

/// A signed, nonce-protected instruction.
///
/// Canonical layout: `from[20] | nonce u64 | public_key[32] | payload | signature[64]`.
/// The signature covers every byte before it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transaction {
    pub from: Address,
    pub nonce: u64,
    pub payload: Payload,
    pub public_key: PublicKey,
    pub signature: Signature,
}

impl Transaction {
    pub fn signed(keypair: &KeyPair, nonce: u64, payload: Payload) -> Self {
        let mut tx = Transaction {
            from: keypair.address(),
            nonce,
            payload,
            public_key: keypair.public_key(),
            signature: Signature([0u8; 64]),
        };
        tx.signature = keypair.sign(&tx.signing_bytes());
        tx
    }

    pub fn signing_bytes(&self) -> Vec<u8> {
        let mut w = Writer::default();
        self.encode_unsigned(&mut w);
        w.into_bytes()
    }

    fn encode_unsigned(&self, w: &mut Writer) {
        w.fixed(&self.from.0).u64(self.nonce).fixed(&self.public_key.0);
        self.payload.encode_to(w);
    }

    pub fn txid(&self) -> Hash32 {
        sha256(&self.to_canonical_bytes())
    }

    /// Signature checks out over the canonical bytes and the key owns `from`.
    pub fn verify(&self) -> bool {
        self.public_key.address() == self.from && self.public_key.verify(&self.signing_bytes(), &self.signature)
    }
}

impl Encode for Transaction {
    fn encode_to(&self, w: &mut Writer) {
        self.encode_unsigned(w);
        w.fixed(&self.signature.0);
    }
}

impl Decode for Transaction {
    fn decode_from(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        Ok(Transaction {
            from: Address(r.array()?),
            nonce: r.u64()?,
            public_key: PublicKey(r.array()?),
            payload: Payload::decode_from(r)?,
            signature: Signature(r.array()?),
        })
    }
}

pub fn sign_transaction(keypair: &KeyPair, tx: &Transaction) -> Signature {
    keypair.sign(&tx.signing_bytes())
}

pub fn verify_transaction(tx: &Transaction) -> bool {
    tx.verify()
}
