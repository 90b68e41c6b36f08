//! Passphrase-protected wallet files.
//!
//! The secret key is sealed with AES-256-GCM under a key stretched from the
//! passphrase by PBKDF2-HMAC-SHA256. Both primitives are available in
//! browser WebCrypto, so the same file opens in the CLI and the web client.

use std::path::Path;

use aes_gcm::aead::Aead;
use aes_gcm::{Aes256Gcm, KeyInit, Nonce};
use rand::rngs::OsRng;
use rand::RngCore;
use serde::{Deserialize, Serialize};
use sha2::Sha256;
use thiserror::Error;

use crate::crypto::{Address, KeyPair, PublicKey, SEED_LEN};

pub const KDF_ALGORITHM: &str = "pbkdf2-hmac-sha256";
pub const CIPHER: &str = "aes-256-gcm";
pub const DEFAULT_ITERATIONS: u32 = 100_000;
const SALT_LEN: usize = 16;
const NONCE_LEN: usize = 12;

#[derive(Debug, Error)]
pub enum WalletError {
    #[error("wrong passphrase or corrupted ciphertext")]
    BadPassphrase,
    #[error("wallet file is inconsistent: {0}")]
    Corrupt(&'static str),
    #[error("unsupported wallet parameter: {0}")]
    Unsupported(String),
    #[error("wallet io: {0}")]
    Io(#[from] std::io::Error),
    #[error("wallet json: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KdfParams {
    pub algorithm: String,
    pub iterations: u32,
    pub salt_hex: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncryptedKey {
    pub cipher: String,
    pub nonce_hex: String,
    /// Ciphertext followed by the 16-byte GCM tag.
    pub ciphertext_hex: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WalletFile {
    pub address: Address,
    pub public_key_hex: String,
    pub encrypted_private_key: EncryptedKey,
    pub kdf_params: KdfParams,
}

fn derive_key(passphrase: &str, salt: &[u8], iterations: u32) -> [u8; 32] {
    let mut key = [0u8; 32];
    pbkdf2::pbkdf2_hmac::<Sha256>(passphrase.as_bytes(), salt, iterations, &mut key);
    key
}

impl WalletFile {
    pub fn seal(keypair: &KeyPair, passphrase: &str, iterations: u32) -> Self {
        let mut salt = [0u8; SALT_LEN];
        let mut nonce = [0u8; NONCE_LEN];
        OsRng.fill_bytes(&mut salt);
        OsRng.fill_bytes(&mut nonce);
        let key = derive_key(passphrase, &salt, iterations);
        let cipher = Aes256Gcm::new_from_slice(&key).expect("32-byte key");
        let ciphertext = cipher
            .encrypt(Nonce::from_slice(&nonce), keypair.secret_bytes().as_slice())
            .expect("aes-gcm encryption of 32 bytes cannot fail");
        WalletFile {
            address: keypair.address(),
            public_key_hex: keypair.public_key().to_hex(),
            encrypted_private_key: EncryptedKey {
                cipher: CIPHER.to_owned(),
                nonce_hex: hex::encode(nonce),
                ciphertext_hex: hex::encode(ciphertext),
            },
            kdf_params: KdfParams {
                algorithm: KDF_ALGORITHM.to_owned(),
                iterations,
                salt_hex: hex::encode(salt),
            },
        }
    }

    pub fn public_key(&self) -> Result<PublicKey, WalletError> {
        PublicKey::from_hex(&self.public_key_hex).map_err(|_| WalletError::Corrupt("public_key_hex"))
    }

    pub fn unlock(&self, passphrase: &str) -> Result<KeyPair, WalletError> {
        if self.kdf_params.algorithm != KDF_ALGORITHM {
            return Err(WalletError::Unsupported(self.kdf_params.algorithm.clone()));
        }
        if self.encrypted_private_key.cipher != CIPHER {
            return Err(WalletError::Unsupported(self.encrypted_private_key.cipher.clone()));
        }
        let salt = hex::decode(&self.kdf_params.salt_hex).map_err(|_| WalletError::Corrupt("salt_hex"))?;
        let nonce = hex::decode(&self.encrypted_private_key.nonce_hex)
            .ok()
            .filter(|n| n.len() == NONCE_LEN)
            .ok_or(WalletError::Corrupt("nonce_hex"))?;
        let ciphertext = hex::decode(&self.encrypted_private_key.ciphertext_hex)
            .map_err(|_| WalletError::Corrupt("ciphertext_hex"))?;

        let key = derive_key(passphrase, &salt, self.kdf_params.iterations);
        let cipher = Aes256Gcm::new_from_slice(&key).expect("32-byte key");
        let plain = cipher
            .decrypt(Nonce::from_slice(&nonce), ciphertext.as_slice())
            .map_err(|_| WalletError::BadPassphrase)?;
        let secret: [u8; SEED_LEN] = plain
            .as_slice()
            .try_into()
            .map_err(|_| WalletError::Corrupt("secret length"))?;
        let keypair = KeyPair::from_secret(secret);

        if keypair.public_key() != self.public_key()? {
            return Err(WalletError::Corrupt("public key does not match secret"));
        }
        if keypair.address() != self.address {
            return Err(WalletError::Corrupt("address does not match public key"));
        }
        Ok(keypair)
    }

    pub fn load(path: &Path) -> Result<Self, WalletError> {
        let raw = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&raw)?)
    }

    pub fn save(&self, path: &Path) -> Result<(), WalletError> {
        let json = serde_json::to_string_pretty(self)?;
        std::fs::write(path, json)?;
        Ok(())
    }
}
