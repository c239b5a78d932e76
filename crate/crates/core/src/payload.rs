//! Keyed payload scrambling and optional length/CRC framing.
//!
//! The keystream is BLAKE2b in keyed mode over `nonce || counter`, one
//! 512-bit block per counter value, consumed MSB first. Scrambling is a
//! plain XOR and therefore its own inverse.

use std::fmt;

use blake2b_simd::Params;
use crc::{Crc, CRC_8_SMBUS};
use thiserror::Error;

pub const MIN_KEY_LEN: usize = 16;
pub const MAX_KEY_LEN: usize = 64;
const BLOCK_BYTES: usize = 64;
/// Bits of the length field that opens a frame.
pub const LENGTH_BITS: usize = 16;
const CHECK_BITS: usize = 8;
/// Framing overhead in bits.
pub const FRAME_OVERHEAD: usize = LENGTH_BITS + CHECK_BITS;

// poly 0x07, init 0, no reflection
const CRC8: Crc<u8> = Crc::<u8>::new(&CRC_8_SMBUS);

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PayloadError {
    #[error("key is {0} bytes; at least {MIN_KEY_LEN} required")]
    KeyTooShort(usize),
    #[error("key is {0} bytes; at most {MAX_KEY_LEN} allowed")]
    KeyTooLong(usize),
    #[error("nothing to scramble")]
    EmptyPayload,
    #[error("payload of {0} bits does not fit a 16-bit length prefix")]
    PayloadTooLong(usize),
    #[error("frame checksum mismatch")]
    ChecksumFailed,
    #[error("frame needs {needed} bits, got {got}")]
    Truncated { needed: usize, got: usize },
    #[error("invalid message: {0}")]
    InvalidMessage(String),
}

/// Secret scrambling key. Never printed or serialized.
#[derive(Clone, PartialEq, Eq)]
pub struct Key(Vec<u8>);

impl Key {
    pub fn new(bytes: impl Into<Vec<u8>>) -> Result<Self, PayloadError> {
        let bytes = bytes.into();
        match bytes.len() {
            n if n < MIN_KEY_LEN => Err(PayloadError::KeyTooShort(n)),
            n if n > MAX_KEY_LEN => Err(PayloadError::KeyTooLong(n)),
            _ => Ok(Self(bytes)),
        }
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl fmt::Debug for Key {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Key(<{} bytes redacted>)", self.0.len())
    }
}

/// First `n_bits` keystream bits for `(key, nonce)`.
pub fn keystream(key: &Key, nonce: u64, n_bits: usize) -> Vec<u8> {
    let mut params = Params::new();
    params.hash_length(BLOCK_BYTES).key(&key.0);
    let mut bits = Vec::with_capacity(n_bits);
    let mut counter: u64 = 0;
    while bits.len() < n_bits {
        let mut input = [0u8; 16];
        input[..8].copy_from_slice(&nonce.to_be_bytes());
        input[8..].copy_from_slice(&counter.to_be_bytes());
        let block = params.hash(&input);
        for byte in block.as_bytes() {
            for shift in (0..8).rev() {
                if bits.len() == n_bits {
                    break;
                }
                bits.push((byte >> shift) & 1);
            }
        }
        counter += 1;
    }
    bits
}

/// XOR with the keystream. Applying it twice restores the input.
pub fn scramble(bits: &[u8], key: &Key, nonce: u64) -> Result<Vec<u8>, PayloadError> {
    if bits.is_empty() {
        return Err(PayloadError::EmptyPayload);
    }
    Ok(bits
        .iter()
        .zip(keystream(key, nonce, bits.len()))
        .map(|(b, k)| b ^ k)
        .collect())
}

fn pack(bits: &[u8]) -> Vec<u8> {
    bits.chunks(8)
        .map(|c| c.iter().enumerate().fold(0u8, |acc, (i, &b)| acc | (b << (7 - i))))
        .collect()
}

fn to_bits(value: u64, width: usize) -> impl Iterator<Item = u8> {
    (0..width).rev().map(move |i| ((value >> i) & 1) as u8)
}

fn from_bits(bits: &[u8]) -> u64 {
    bits.iter().fold(0, |acc, &b| (acc << 1) | u64::from(b))
}

/// `[16-bit length][body][CRC-8 over length and body]`.
pub fn frame(bits: &[u8]) -> Result<Vec<u8>, PayloadError> {
    if bits.len() > u16::MAX as usize {
        return Err(PayloadError::PayloadTooLong(bits.len()));
    }
    let mut out: Vec<u8> = to_bits(bits.len() as u64, LENGTH_BITS).collect();
    out.extend_from_slice(bits);
    let check = CRC8.checksum(&pack(&out));
    out.extend(to_bits(u64::from(check), CHECK_BITS));
    Ok(out)
}

/// Total framed length announced by the first 16 bits, if present.
pub fn framed_len(prefix: &[u8]) -> Option<usize> {
    (prefix.len() >= LENGTH_BITS).then(|| from_bits(&prefix[..LENGTH_BITS]) as usize + FRAME_OVERHEAD)
}

pub fn unframe(bits: &[u8]) -> Result<Vec<u8>, PayloadError> {
    let needed = framed_len(bits).ok_or(PayloadError::Truncated {
        needed: FRAME_OVERHEAD,
        got: bits.len(),
    })?;
    if bits.len() != needed {
        return Err(PayloadError::Truncated {
            needed,
            got: bits.len(),
        });
    }
    let (covered, check) = bits.split_at(needed - CHECK_BITS);
    if CRC8.checksum(&pack(covered)) as u64 != from_bits(check) {
        return Err(PayloadError::ChecksumFailed);
    }
    Ok(covered[LENGTH_BITS..].to_vec())
}

/// Parses `0x`-prefixed hex or a string of `0`/`1` characters.
pub fn parse_message(s: &str) -> Result<Vec<u8>, PayloadError> {
    let s = s.trim();
    if let Some(hex) = s.strip_prefix("0x").or_else(|| s.strip_prefix("0X")) {
        if hex.is_empty() {
            return Err(PayloadError::InvalidMessage("empty hex string".into()));
        }
        return hex
            .chars()
            .map(|c| {
                c.to_digit(16)
                    .ok_or_else(|| PayloadError::InvalidMessage(format!("bad hex digit {c:?}")))
            })
            .try_fold(Vec::new(), |mut acc, d| {
                acc.extend(to_bits(u64::from(d?), 4));
                Ok(acc)
            });
    }
    if s.is_empty() {
        return Err(PayloadError::InvalidMessage("empty message".into()));
    }
    s.chars()
        .map(|c| match c {
            '0' => Ok(0),
            '1' => Ok(1),
            other => Err(PayloadError::InvalidMessage(format!(
                "expected 0/1 or 0x-prefixed hex, found {other:?}"
            ))),
        })
        .collect()
}

/// Message-to-channel transform: optional framing, then optional scrambling.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Codec {
    pub key: Option<Key>,
    pub nonce: u64,
    pub framed: bool,
}

impl Codec {
    fn mask(&self, bits: &[u8]) -> Result<Vec<u8>, PayloadError> {
        match &self.key {
            Some(key) => scramble(bits, key, self.nonce),
            None if bits.is_empty() => Err(PayloadError::EmptyPayload),
            None => Ok(bits.to_vec()),
        }
    }

    pub fn encode(&self, message: &[u8]) -> Result<Vec<u8>, PayloadError> {
        if self.framed {
            self.mask(&frame(message)?)
        } else {
            self.mask(message)
        }
    }

    pub fn decode(&self, channel: &[u8]) -> Result<Vec<u8>, PayloadError> {
        let plain = self.mask(channel)?;
        if self.framed {
            unframe(&plain)
        } else {
            Ok(plain)
        }
    }

    /// Channel length announced by the first [`LENGTH_BITS`] channel bits.
    pub fn channel_len(&self, prefix: &[u8]) -> Result<usize, PayloadError> {
        if prefix.len() < LENGTH_BITS {
            return Err(PayloadError::Truncated {
                needed: LENGTH_BITS,
                got: prefix.len(),
            });
        }
        let plain = self.mask(&prefix[..LENGTH_BITS])?;
        Ok(framed_len(&plain).expect("prefix holds the length field"))
    }
}

pub fn bits_to_string(bits: &[u8]) -> String {
    bits.iter().map(|&b| if b == 0 { '0' } else { '1' }).collect()
}
