//! Prefix-preserving IPv4 anonymization (Crypto-PAn).
//!
//! A 32-byte key splits into a 16-byte AES-128 key and a 16-byte pad seed.
//! The pad block is the encryption of the seed. Bit `i` of the output
//! (most significant first) is bit `i` of the input XOR the top bit of
//! `AES(prefix_i)`, where `prefix_i` keeps the input's top `i` bits and takes
//! the remaining `128 - i` bits from the pad block. Bit `i` of the output
//! therefore depends only on bits `0..=i` of the input, which makes the map a
//! bijection that preserves shared-prefix length exactly.
//!
//! There is deliberately no inverse mapping.

use std::collections::HashMap;
use std::fmt;
use std::path::Path;

use aes::cipher::generic_array::GenericArray;
use aes::cipher::{BlockEncrypt, KeyInit};
use aes::Aes128;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::pcap::IpPair;

pub const KEY_LEN: usize = 32;

#[derive(Debug, Error)]
pub enum KeyError {
    #[error("key material must be exactly {KEY_LEN} bytes, got {0}")]
    KeyLength(usize),
    #[error("key must be {} hex characters", KEY_LEN * 2)]
    NotHex,
    #[error("key file {path}: {source}")]
    File {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("environment variable {0} is not set or not unicode")]
    MissingEnv(String),
}

/// 256 bits of anonymization key material.
#[derive(Clone, PartialEq, Eq)]
pub struct AnonKey {
    cipher_key: [u8; 16],
    pad_seed: [u8; 16],
}

impl fmt::Debug for AnonKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "AnonKey({})", self.fingerprint())
    }
}

impl AnonKey {
    pub fn from_bytes(bytes: &[u8]) -> Result<Self, KeyError> {
        if bytes.len() != KEY_LEN {
            return Err(KeyError::KeyLength(bytes.len()));
        }
        let mut cipher_key = [0u8; 16];
        let mut pad_seed = [0u8; 16];
        cipher_key.copy_from_slice(&bytes[..16]);
        pad_seed.copy_from_slice(&bytes[16..]);
        Ok(AnonKey {
            cipher_key,
            pad_seed,
        })
    }

    /// Parse 64 hex characters, optionally followed by one line terminator.
    pub fn from_hex(text: &str) -> Result<Self, KeyError> {
        let text = text
            .strip_suffix('\n')
            .map(|t| t.strip_suffix('\r').unwrap_or(t))
            .unwrap_or(text);
        if text.len() != KEY_LEN * 2 || !text.bytes().all(|b| b.is_ascii_hexdigit()) {
            return Err(KeyError::NotHex);
        }
        let bytes = hex::decode(text).map_err(|_| KeyError::NotHex)?;
        Self::from_bytes(&bytes)
    }

    /// Load a hex key file. Raw binary key files are rejected.
    pub fn from_key_file(path: impl AsRef<Path>) -> Result<Self, KeyError> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|source| KeyError::File {
            path: path.display().to_string(),
            source,
        })?;
        let text = std::str::from_utf8(&bytes).map_err(|_| KeyError::NotHex)?;
        Self::from_hex(text)
    }

    pub fn from_env(var: &str) -> Result<Self, KeyError> {
        let value = std::env::var(var).map_err(|_| KeyError::MissingEnv(var.to_string()))?;
        Self::from_hex(&value)
    }

    pub fn to_hex(&self) -> String {
        let mut s = hex::encode(self.cipher_key);
        s.push_str(&hex::encode(self.pad_seed));
        s
    }

    /// First 8 hex characters of SHA-256 over the 32 key bytes.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.cipher_key);
        h.update(self.pad_seed);
        hex::encode(&h.finalize()[..4])
    }
}

/// Keyed prefix-preserving bijection on IPv4 addresses.
///
/// Immutable once derived and shareable across threads.
#[derive(Clone)]
pub struct Anonymizer {
    cipher: Aes128,
    pad: u128,
}

impl fmt::Debug for Anonymizer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("Anonymizer { .. }")
    }
}

impl Anonymizer {
    pub fn derive(key: &AnonKey) -> Self {
        let cipher = Aes128::new(GenericArray::from_slice(&key.cipher_key));
        let mut block = GenericArray::clone_from_slice(&key.pad_seed);
        cipher.encrypt_block(&mut block);
        let pad = u128::from_be_bytes(block.into());
        Anonymizer { cipher, pad }
    }

    pub fn from_key_bytes(bytes: &[u8]) -> Result<Self, KeyError> {
        AnonKey::from_bytes(bytes).map(|k| Self::derive(&k))
    }

    pub fn anonymize_ip(&self, addr: u32) -> u32 {
        let original = (addr as u128) << 96;
        let mut blocks = [GenericArray::default(); 32];
        for (i, block) in blocks.iter_mut().enumerate() {
            // top i bits from the address, low 128 - i bits from the pad
            let keep = if i == 0 { 0 } else { !0u128 << (128 - i) };
            let prefix = (original & keep) | (self.pad & !keep);
            *block = GenericArray::from(prefix.to_be_bytes());
        }
        self.cipher.encrypt_blocks(&mut blocks);
        let flips = blocks
            .iter()
            .fold(0u32, |acc, b| (acc << 1) | u32::from(b[0] >> 7));
        addr ^ flips
    }

    /// Map both coordinates with the same key.
    pub fn anonymize_pair(&self, pair: IpPair) -> AnonPair {
        AnonPair {
            src: self.anonymize_ip(pair.src),
            dst: self.anonymize_ip(pair.dst),
        }
    }
}

/// An address pair that has passed through an [`Anonymizer`].
///
/// Only the anonymizer constructs these, so anything downstream that accepts
/// `AnonPair` cannot be handed raw addresses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct AnonPair {
    src: u32,
    dst: u32,
}

impl AnonPair {
    #[cfg(test)]
    pub(crate) fn from_raw(src: u32, dst: u32) -> Self {
        AnonPair { src, dst }
    }

    pub fn src(&self) -> u32 {
        self.src
    }

    pub fn dst(&self) -> u32 {
        self.dst
    }
}

/// Memoizing front end for one worker.
///
/// Heavy-tailed traffic reuses a small set of addresses, so caching saves most
/// of the block encryptions. The cache is cleared when it reaches `capacity`
/// and never changes results.
pub struct CachedAnonymizer<'a> {
    inner: &'a Anonymizer,
    cache: HashMap<u32, u32>,
    capacity: usize,
}

impl<'a> CachedAnonymizer<'a> {
    pub const DEFAULT_CAPACITY: usize = 1 << 20;

    pub fn new(inner: &'a Anonymizer) -> Self {
        Self::with_capacity(inner, Self::DEFAULT_CAPACITY)
    }

    pub fn with_capacity(inner: &'a Anonymizer, capacity: usize) -> Self {
        CachedAnonymizer {
            inner,
            cache: HashMap::new(),
            capacity: capacity.max(1),
        }
    }

    pub fn anonymize_ip(&mut self, addr: u32) -> u32 {
        if let Some(&out) = self.cache.get(&addr) {
            return out;
        }
        if self.cache.len() >= self.capacity {
            self.cache.clear();
        }
        let out = self.inner.anonymize_ip(addr);
        self.cache.insert(addr, out);
        out
    }

    pub fn anonymize_pair(&mut self, pair: IpPair) -> AnonPair {
        AnonPair {
            src: self.anonymize_ip(pair.src),
            dst: self.anonymize_ip(pair.dst),
        }
    }
}

/// Number of leading bits two addresses have in common (0..=32).
pub fn shared_prefix_len(a: u32, b: u32) -> u32 {
    (a ^ b).leading_zeros()
}
