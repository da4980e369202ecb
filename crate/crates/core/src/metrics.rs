//! Energy-proxy and fidelity metrics over frame bitstreams.
//!
//! A frame is serialized as a bitstream in row-major pixel order with
//! interleaved channels, each word emitted MSB first. Density does not depend
//! on that order; transition activity does.

use serde::Serialize;
use thiserror::Error;

use crate::frame::{max_word, Frame};

pub const DEFAULT_WORD_WIDTH: u32 = 8;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MetricsError {
    #[error("empty bitstream")]
    EmptyStream,
    #[error("raw stream has no set bits; normalized density is undefined")]
    UndefinedRatio,
    #[error("stream holds {words} word(s) of {word_width} bits; need at least 2")]
    TooShort { words: usize, word_width: u32 },
    #[error("stream length {len} is not a multiple of word width {word_width}")]
    Misaligned { len: usize, word_width: u32 },
    #[error("word width {0} outside 1..=64")]
    WordWidth(u32),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
}

/// Packed bit sequence, MSB first within each byte.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct BitStream {
    bytes: Vec<u8>,
    len: usize,
}

impl BitStream {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_capacity(bits: usize) -> Self {
        Self {
            bytes: Vec::with_capacity(bits.div_ceil(8)),
            len: 0,
        }
    }

    pub fn from_bools(bits: &[bool]) -> Self {
        let mut s = Self::with_capacity(bits.len());
        for &b in bits {
            s.push(b);
        }
        s
    }

    /// Whole bytes, 8 bits each.
    pub fn from_bytes(bytes: &[u8]) -> Self {
        Self {
            bytes: bytes.to_vec(),
            len: bytes.len() * 8,
        }
    }

    /// Each word contributes its low `bit_width` bits, MSB first.
    pub fn from_words(words: &[u16], bit_width: u8) -> Self {
        if bit_width == 8 {
            let bytes: Vec<u8> = words.iter().map(|&w| w as u8).collect();
            return Self::from_bytes(&bytes);
        }
        let mut s = Self::with_capacity(words.len() * bit_width as usize);
        for &w in words {
            s.push_bits(w as u64, bit_width as u32);
        }
        s
    }

    pub fn from_frame(frame: &Frame) -> Self {
        Self::from_words(frame.pixels(), frame.bit_width())
    }

    pub fn push(&mut self, bit: bool) {
        if self.len.is_multiple_of(8) {
            self.bytes.push(0);
        }
        if bit {
            *self.bytes.last_mut().unwrap() |= 0x80 >> (self.len % 8);
        }
        self.len += 1;
    }

    /// Appends the low `n` bits of `value`, most significant first.
    pub fn push_bits(&mut self, value: u64, n: u32) {
        for j in (0..n).rev() {
            self.push((value >> j) & 1 == 1);
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn get(&self, i: usize) -> bool {
        assert!(i < self.len, "bit index {i} out of range {}", self.len);
        self.bytes[i / 8] & (0x80 >> (i % 8)) != 0
    }

    pub fn count_ones(&self) -> usize {
        // Padding bits past `len` are always zero.
        self.bytes.iter().map(|b| b.count_ones() as usize).sum()
    }

    pub fn complement(&self) -> BitStream {
        let mut bytes: Vec<u8> = self.bytes.iter().map(|b| !b).collect();
        let tail = self.len % 8;
        if tail != 0 {
            *bytes.last_mut().unwrap() &= 0xffu8 << (8 - tail);
        }
        BitStream {
            bytes,
            len: self.len,
        }
    }

    pub fn concat(&self, other: &BitStream) -> BitStream {
        let mut out = self.clone();
        for i in 0..other.len {
            out.push(other.get(i));
        }
        out
    }

    /// Reads `n <= 64` bits starting at `start` as an integer.
    fn read_bits(&self, start: usize, n: u32) -> u64 {
        if start.is_multiple_of(8) && n.is_multiple_of(8) {
            let first = start / 8;
            return self.bytes[first..first + n as usize / 8]
                .iter()
                .fold(0u64, |v, &b| (v << 8) | b as u64);
        }
        let mut v = 0u64;
        for i in start..start + n as usize {
            v = (v << 1) | u64::from(self.get(i));
        }
        v
    }

    /// Consecutive `word_width`-bit words. Trailing bits that do not fill a
    /// word are ignored.
    pub fn words(&self, word_width: u32) -> impl Iterator<Item = u64> + '_ {
        let n = self.len / word_width as usize;
        (0..n).map(move |i| self.read_bits(i * word_width as usize, word_width))
    }
}

/// Fraction of set bits.
pub fn bit1_density(stream: &BitStream) -> Result<f64, MetricsError> {
    if stream.is_empty() {
        return Err(MetricsError::EmptyStream);
    }
    Ok(stream.count_ones() as f64 / stream.len() as f64)
}

/// Normalized bit-1 density, `density(enc) / density(raw)`.
pub fn nbd(raw: &BitStream, enc: &BitStream) -> Result<f64, MetricsError> {
    let r = bit1_density(raw)?;
    let e = bit1_density(enc)?;
    if raw.count_ones() == 0 {
        return Err(MetricsError::UndefinedRatio);
    }
    Ok(e / r)
}

/// Mean per-bit Hamming distance between consecutive `word_width`-bit words.
pub fn transition_activity(stream: &BitStream, word_width: u32) -> Result<f64, MetricsError> {
    if !(1..=64).contains(&word_width) {
        return Err(MetricsError::WordWidth(word_width));
    }
    if !stream.len().is_multiple_of(word_width as usize) {
        return Err(MetricsError::Misaligned {
            len: stream.len(),
            word_width,
        });
    }
    let n = stream.len() / word_width as usize;
    if n < 2 {
        return Err(MetricsError::TooShort {
            words: n,
            word_width,
        });
    }
    let mut toggles = 0u64;
    let mut words = stream.words(word_width);
    let mut prev = words.next().unwrap();
    for w in words {
        toggles += (w ^ prev).count_ones() as u64;
        prev = w;
    }
    Ok(toggles as f64 / ((n - 1) as f64 * word_width as f64))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Psnr {
    pub mse: f64,
    /// `f64::INFINITY` for identical frames.
    pub psnr_db: f64,
}

pub fn psnr(reference: &Frame, test: &Frame) -> Result<Psnr, MetricsError> {
    if !reference.same_shape(test) {
        return Err(MetricsError::DimensionMismatch(format!(
            "{}x{}x{} ({} bit) vs {}x{}x{} ({} bit)",
            reference.width(),
            reference.height(),
            reference.channels(),
            reference.bit_width(),
            test.width(),
            test.height(),
            test.channels(),
            test.bit_width()
        )));
    }
    let n = reference.pixels().len();
    if n == 0 {
        return Err(MetricsError::EmptyStream);
    }
    let sse: u64 = reference
        .pixels()
        .iter()
        .zip(test.pixels())
        .map(|(&a, &b)| {
            let d = a.abs_diff(b) as u64;
            d * d
        })
        .sum();
    let mse = sse as f64 / n as f64;
    let peak = max_word(reference.bit_width()) as f64;
    let psnr_db = if sse == 0 {
        f64::INFINITY
    } else {
        10.0 * (peak * peak / mse).log10()
    };
    Ok(Psnr { mse, psnr_db })
}

/// Per-frame energy-proxy and fidelity figures.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ActivityReport {
    pub frame_index: u64,
    pub raw_bit1_density: f64,
    pub enc_bit1_density: f64,
    /// `None` when the raw frame has no set bits.
    pub nbd: Option<f64>,
    pub alpha_raw: f64,
    pub alpha_enc: f64,
    pub word_width: u32,
    pub mse: f64,
    pub psnr_db: f64,
    pub raw_ones: u64,
    pub enc_ones: u64,
    pub total_bits: u64,
    /// Fraction of pixels routed to the full-precision path, when known.
    pub mask_coverage: Option<f64>,
}

impl ActivityReport {
    /// `encoded` is the stored stream; `decoded` is what the consumer sees
    /// and is compared against `raw` for fidelity.
    pub fn measure(
        frame_index: u64,
        raw: &Frame,
        encoded: &Frame,
        decoded: &Frame,
        word_width: u32,
        mask_coverage: Option<f64>,
    ) -> Result<Self, MetricsError> {
        if !raw.same_shape(encoded) {
            return Err(MetricsError::DimensionMismatch(
                "encoded stream shape differs from raw frame".into(),
            ));
        }
        let raw_bits = BitStream::from_frame(raw);
        let enc_bits = BitStream::from_frame(encoded);
        let raw_bit1_density = bit1_density(&raw_bits)?;
        let enc_bit1_density = bit1_density(&enc_bits)?;
        let nbd = match nbd(&raw_bits, &enc_bits) {
            Ok(v) => Some(v),
            Err(MetricsError::UndefinedRatio) => None,
            Err(e) => return Err(e),
        };
        let alpha_raw = transition_activity(&raw_bits, word_width)?;
        let alpha_enc = transition_activity(&enc_bits, word_width)?;
        let Psnr { mse, psnr_db } = psnr(raw, decoded)?;
        Ok(Self {
            frame_index,
            raw_bit1_density,
            enc_bit1_density,
            nbd,
            alpha_raw,
            alpha_enc,
            word_width,
            mse,
            psnr_db,
            raw_ones: raw_bits.count_ones() as u64,
            enc_ones: enc_bits.count_ones() as u64,
            total_bits: raw_bits.len() as u64,
            mask_coverage,
        })
    }
}
