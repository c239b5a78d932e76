//! Blind payload recovery.
//!
//! The reader repeats the embedder's analysis on the marked page (the
//! baseline line carries no bits, so both thresholds come out the same)
//! and reads one bit per character: `1` when its core is no thicker than
//! the embedding threshold.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::core_model::DEFAULT_TC;
use crate::embedder::{analyze_page, check_lambda, EmbedConfig, EmbedError, DEFAULT_LAMBDA, DEFAULT_NS};
use crate::imageio::{accuracy, BinaryImage, ImageError};
use crate::payload::{Codec, PayloadError, LENGTH_BITS};
use crate::segmentation::SegmentError;

#[derive(Debug, Error)]
pub enum ExtractError {
    #[error("page has {0} text line(s); at least 2 are needed")]
    TooFewLines(usize),
    #[error("baseline line has no characters")]
    EmptyBaseline,
    #[error("no characters outside the baseline line")]
    EmptyDocument,
    #[error("need {needed} bits but the page carries {available}")]
    InsufficientBits { needed: usize, available: usize },
    #[error("extracted {got} bits, ground truth has {expected}")]
    LengthMismatch { got: usize, expected: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Payload(#[from] PayloadError),
    #[error(transparent)]
    Segment(#[from] SegmentError),
    #[error(transparent)]
    Image(#[from] ImageError),
}

impl From<EmbedError> for ExtractError {
    fn from(e: EmbedError) -> Self {
        match e {
            EmbedError::TooFewLines(n) => Self::TooFewLines(n),
            EmbedError::EmptyBaseline => Self::EmptyBaseline,
            EmbedError::EmptyDocument => Self::EmptyDocument,
            EmbedError::Segment(s) => Self::Segment(s),
            other => Self::InvalidConfig(other.to_string()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PayloadLength {
    /// Exactly this many channel bits.
    Bits(usize),
    /// Read the length from the frame header.
    Framed,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExtractConfig {
    pub length: PayloadLength,
    pub lambda: f64,
    pub t_c: usize,
    pub n_s: usize,
    pub es_enabled: bool,
    pub codec: Codec,
}

impl ExtractConfig {
    pub fn new(length: PayloadLength) -> Self {
        Self {
            length,
            lambda: DEFAULT_LAMBDA,
            t_c: DEFAULT_TC,
            n_s: DEFAULT_NS,
            es_enabled: false,
            codec: Codec::default(),
        }
    }

    /// Reader settings matching an embedding run.
    pub fn matching(cfg: &EmbedConfig, length: PayloadLength, codec: Codec) -> Self {
        Self {
            length,
            lambda: cfg.lambda,
            t_c: cfg.t_c,
            n_s: cfg.n_s,
            es_enabled: cfg.es_enabled,
            codec,
        }
    }
}

/// `1` iff the core is at most the threshold.
pub fn decode_bit(t_delta: usize, thickness: usize) -> u8 {
    u8::from(thickness <= t_delta)
}

/// Majority vote; ties read as `1`.
pub fn majority(votes: &[u8]) -> u8 {
    let ones = votes.iter().filter(|&&v| v == 1).count();
    u8::from(2 * ones >= votes.len())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CharReading {
    pub char: usize,
    pub n_core: usize,
    pub bit: u8,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SlotReading {
    pub line: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sub: Option<usize>,
    pub chars: Vec<CharReading>,
    pub bit: u8,
}

impl SlotReading {
    fn ones(&self) -> usize {
        self.chars.iter().filter(|c| c.bit == 1).count()
    }
}

/// Every carrier read from a page, in reading order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PageReading {
    pub t_delta: usize,
    pub t_lambda: f64,
    pub es_enabled: bool,
    pub slots: Vec<SlotReading>,
}

pub fn read_page(
    page: &BinaryImage,
    lambda: f64,
    t_c: usize,
    n_s: usize,
    es_enabled: bool,
) -> Result<PageReading, ExtractError> {
    check_lambda(lambda)?;
    if n_s == 0 {
        return Err(ExtractError::InvalidConfig("n_s must be at least 1".into()));
    }
    let analysis = analyze_page(page, lambda, t_c)?;
    let slots = analysis
        .slots(es_enabled, n_s)?
        .into_iter()
        .map(|slot| {
            let chars: Vec<CharReading> = slot
                .chars
                .iter()
                .map(|&c| {
                    let n_core = analysis.cores[slot.line][c].thickness;
                    CharReading {
                        char: c,
                        n_core,
                        bit: decode_bit(analysis.t_delta, n_core),
                    }
                })
                .collect();
            let votes: Vec<u8> = chars.iter().map(|c| c.bit).collect();
            SlotReading {
                line: slot.line,
                sub: slot.sub,
                bit: majority(&votes),
                chars,
            }
        })
        .collect();
    Ok(PageReading {
        t_delta: analysis.t_delta,
        t_lambda: analysis.t_lambda,
        es_enabled,
        slots,
    })
}

impl PageReading {
    pub fn capacity(&self) -> usize {
        self.slots.len()
    }

    fn ensure(&self, needed: usize) -> Result<(), ExtractError> {
        if needed > self.slots.len() {
            return Err(ExtractError::InsufficientBits {
                needed,
                available: self.slots.len(),
            });
        }
        Ok(())
    }

    /// Bits of the first `n` carriers, without replica merging.
    pub fn prefix(&self, n: usize) -> Result<Vec<u8>, ExtractError> {
        self.ensure(n)?;
        Ok(self.slots[..n].iter().map(|s| s.bit).collect())
    }

    /// `len` channel bits. In ES mode carrier `j` repeats bit `j mod len`;
    /// replicas are merged by majority, ties fall back to the pooled
    /// character votes and then to `1`.
    pub fn decode(&self, len: usize) -> Result<Vec<u8>, ExtractError> {
        if !self.es_enabled {
            return self.prefix(len);
        }
        self.ensure(len)?;
        if len == 0 {
            return Ok(Vec::new());
        }
        let mut out = Vec::with_capacity(len);
        for j in 0..len {
            let replicas: Vec<&SlotReading> = self.slots.iter().skip(j).step_by(len).collect();
            let ones = replicas.iter().filter(|s| s.bit == 1).count();
            let bit = match (2 * ones).cmp(&replicas.len()) {
                std::cmp::Ordering::Greater => 1,
                std::cmp::Ordering::Less => 0,
                std::cmp::Ordering::Equal => {
                    let pooled: usize = replicas.iter().map(|s| s.ones()).sum();
                    let total: usize = replicas.iter().map(|s| s.chars.len()).sum();
                    u8::from(2 * pooled >= total)
                }
            };
            out.push(bit);
        }
        Ok(out)
    }
}

/// Channel bits of a page, before the codec is undone.
pub fn extract_channel(page: &BinaryImage, cfg: &ExtractConfig) -> Result<Vec<u8>, ExtractError> {
    let reading = read_page(page, cfg.lambda, cfg.t_c, cfg.n_s, cfg.es_enabled)?;
    channel_bits(&reading, cfg)
}

fn channel_bits(reading: &PageReading, cfg: &ExtractConfig) -> Result<Vec<u8>, ExtractError> {
    let len = match cfg.length {
        PayloadLength::Bits(n) => n,
        PayloadLength::Framed => {
            let head = if cfg.es_enabled {
                // replica stride is unknown until the length is read, so the
                // header comes from the first carriers only
                reading.prefix(LENGTH_BITS)?
            } else {
                reading.decode(LENGTH_BITS)?
            };
            cfg.codec.channel_len(&head)?
        }
    };
    reading.decode(len)
}

/// Recovered message: channel bits with framing and scrambling undone.
pub fn extract_page(page: &BinaryImage, cfg: &ExtractConfig) -> Result<Vec<u8>, ExtractError> {
    let channel = extract_channel(page, cfg)?;
    Ok(cfg.codec.decode(&channel)?)
}

/// Channel bits plus their bit accuracy against `truth`.
pub fn extract_with_report(
    page: &BinaryImage,
    cfg: &ExtractConfig,
    truth: &[u8],
) -> Result<(Vec<u8>, f64), ExtractError> {
    let bits = extract_channel(page, cfg)?;
    if bits.len() != truth.len() {
        return Err(ExtractError::LengthMismatch {
            got: bits.len(),
            expected: truth.len(),
        });
    }
    let acc = accuracy(&bits, truth)?;
    Ok((bits, acc))
}
