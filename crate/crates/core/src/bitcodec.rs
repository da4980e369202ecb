//! Word-level transforms for the RoI-guided hybrid coder.
//!
//! Each pixel channel is a `B`-bit word. Inside the region of interest the top
//! `k` bits are complemented when they are dense, and the decision is written
//! into bit 0 so the stored width never changes. Background words are first
//! truncated to their top `k` bits and then shaped the same way. Decoding is a
//! single conditional XOR on either path.

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::frame::{max_word, Frame, FrameError};
use crate::roi::RoiMask;

pub const MAX_BIT_WIDTH: u8 = 16;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CodecError {
    #[error("bit width {0} outside 2..=16")]
    BitWidth(u8),
    #[error("retained k={k} outside 1..={max} for bit width {bit_width}")]
    RetainedBits { k: u8, bit_width: u8, max: u8 },
    #[error("tau={tau} exceeds retained k={k}")]
    Tau { tau: u8, k: u8 },
    #[error("block size must be at least 1")]
    BlockSize,
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error(transparent)]
    Frame(#[from] FrameError),
}

/// Coding parameters shared by encoder and decoder.
///
/// `retained_k` is capped at `bit_width - 1` so that bit 0 always lies outside
/// the shaped range and can carry the inversion flag.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct CodingParams {
    bit_width: u8,
    retained_k: u8,
    tau: u8,
    block_size: u16,
}

impl CodingParams {
    /// Builds parameters with the default threshold `tau = floor(k / 2)`.
    pub fn new(bit_width: u8, retained_k: u8, block_size: u16) -> Result<Self, CodecError> {
        Self::with_tau(bit_width, retained_k, retained_k / 2, block_size)
    }

    pub fn with_tau(
        bit_width: u8,
        retained_k: u8,
        tau: u8,
        block_size: u16,
    ) -> Result<Self, CodecError> {
        if !(2..=MAX_BIT_WIDTH).contains(&bit_width) {
            return Err(CodecError::BitWidth(bit_width));
        }
        if retained_k == 0 || retained_k >= bit_width {
            return Err(CodecError::RetainedBits {
                k: retained_k,
                bit_width,
                max: bit_width - 1,
            });
        }
        if tau > retained_k {
            return Err(CodecError::Tau { tau, k: retained_k });
        }
        if block_size == 0 {
            return Err(CodecError::BlockSize);
        }
        Ok(Self {
            bit_width,
            retained_k,
            tau,
            block_size,
        })
    }

    pub fn bit_width(&self) -> u8 {
        self.bit_width
    }

    pub fn retained_k(&self) -> u8 {
        self.retained_k
    }

    pub fn tau(&self) -> u8 {
        self.tau
    }

    pub fn block_size(&self) -> u16 {
        self.block_size
    }

    pub fn max_value(&self) -> u16 {
        max_word(self.bit_width)
    }

    /// Upper bound on the top-k Hamming weight of any encoded word.
    pub fn shaped_weight_bound(&self) -> u32 {
        let k = self.retained_k as u32;
        let tau = self.tau as u32;
        tau.max((k - tau).saturating_sub(1))
    }

    /// Number of low bits zeroed by truncation, `B - k`.
    fn dropped_bits(&self) -> u8 {
        self.bit_width - self.retained_k
    }
}

/// Mask selecting the `k` most significant bits of a `B`-bit word.
pub fn msb_mask(params: &CodingParams) -> u16 {
    let low = params.dropped_bits();
    params.max_value() & !(((1u32 << low) - 1) as u16)
}

pub fn top_k_weight(x: u16, params: &CodingParams) -> u32 {
    (x & msb_mask(params)).count_ones()
}

/// 1 when the top-k bits are dense enough to be worth complementing.
pub fn inversion_flag(x: u16, params: &CodingParams) -> u16 {
    u16::from(top_k_weight(x, params) > params.tau as u32)
}

pub fn truncate_k(x: u16, params: &CodingParams) -> u16 {
    x & msb_mask(params)
}

#[inline]
fn shape(x: u16, flag: u16, params: &CodingParams) -> u16 {
    let inverted = x ^ (flag.wrapping_neg() & msb_mask(params));
    (inverted & !1) | flag
}

/// Flag-guarded inversion of the top-k bits; bits `1..B-k` pass through.
pub fn encode_roi(x: u16, params: &CodingParams) -> u16 {
    shape(x, inversion_flag(x, params), params)
}

/// Undo the top-k inversion recorded in bit 0. The flag stays in bit 0.
pub fn decode_roi(e: u16, params: &CodingParams) -> u16 {
    let flag = e & 1;
    e ^ (flag.wrapping_neg() & msb_mask(params))
}

/// Truncate to the top-k bits, then shape them with the flag taken from the
/// truncated value.
pub fn encode_bg(x: u16, params: &CodingParams) -> u16 {
    let t = truncate_k(x, params);
    shape(t, inversion_flag(t, params), params)
}

/// Background decoding is the same XOR as the RoI path; the low bits stay
/// truncated.
pub fn decode_bg(e: u16, params: &CodingParams) -> u16 {
    decode_roi(e, params)
}

/// A frame after mask-routed encoding, together with the side information
/// needed to decode it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncodedFrame {
    params: CodingParams,
    mask: RoiMask,
    width: u32,
    height: u32,
    channels: u8,
    pixels: Vec<u16>,
}

impl EncodedFrame {
    pub fn new(
        params: CodingParams,
        mask: RoiMask,
        width: u32,
        height: u32,
        channels: u8,
        pixels: Vec<u16>,
    ) -> Result<Self, CodecError> {
        // Reuse the frame checks for shape and word range.
        let frame = Frame::new(width, height, channels, params.bit_width, pixels)?;
        check_mask(&frame, &mask, &params)?;
        Ok(Self {
            params,
            mask,
            width,
            height,
            channels,
            pixels: frame.into_pixels(),
        })
    }

    pub fn params(&self) -> &CodingParams {
        &self.params
    }

    pub fn mask(&self) -> &RoiMask {
        &self.mask
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn channels(&self) -> u8 {
        self.channels
    }

    pub fn pixels(&self) -> &[u16] {
        &self.pixels
    }

    /// The encoded words viewed as a plain frame (the stored stream).
    pub fn as_frame(&self) -> Frame {
        Frame::new(
            self.width,
            self.height,
            self.channels,
            self.params.bit_width,
            self.pixels.clone(),
        )
        .expect("encoded frame invariants hold")
    }
}

fn check_mask(frame: &Frame, mask: &RoiMask, params: &CodingParams) -> Result<(), CodecError> {
    if frame.bit_width() != params.bit_width {
        return Err(CodecError::DimensionMismatch(format!(
            "frame has {} bits per word, params expect {}",
            frame.bit_width(),
            params.bit_width
        )));
    }
    if mask.block_size() != params.block_size {
        return Err(CodecError::DimensionMismatch(format!(
            "mask block size {} differs from params block size {}",
            mask.block_size(),
            params.block_size
        )));
    }
    if !mask.covers(frame.dims()) {
        return Err(CodecError::DimensionMismatch(format!(
            "mask grid {}x{} (block {}) does not cover a {}x{} frame",
            mask.grid_width(),
            mask.grid_height(),
            mask.block_size(),
            frame.width(),
            frame.height()
        )));
    }
    Ok(())
}

/// Applies `roi` to words whose pixel is inside the mask and `bg` elsewhere.
/// Rows are processed in parallel on the current rayon pool.
fn route_rows(
    pixels: &[u16],
    row_len: usize,
    channels: usize,
    mask: &RoiMask,
    roi: impl Fn(u16) -> u16 + Sync,
    bg: impl Fn(u16) -> u16 + Sync,
) -> Vec<u16> {
    let block = mask.block_size() as usize;
    let mut out = vec![0u16; pixels.len()];
    out.par_chunks_mut(row_len.max(1))
        .zip(pixels.par_chunks(row_len.max(1)))
        .enumerate()
        .for_each(|(y, (dst, src))| {
            let by = (y / block) as u32;
            for (x, (d, s)) in dst
                .chunks_exact_mut(channels)
                .zip(src.chunks_exact(channels))
                .enumerate()
            {
                let in_roi = mask.get((x / block) as u32, by);
                for (dw, &sw) in d.iter_mut().zip(s) {
                    *dw = if in_roi { roi(sw) } else { bg(sw) };
                }
            }
        });
    out
}

/// Per-pixel routing: RoI pixels take [`encode_roi`], the rest
/// [`encode_bg`]. All channels of a pixel share its mask bit.
pub fn encode_frame(
    frame: &Frame,
    mask: &RoiMask,
    params: &CodingParams,
) -> Result<EncodedFrame, CodecError> {
    check_mask(frame, mask, params)?;
    let p = *params;
    let pixels = route_rows(
        frame.pixels(),
        frame.row_len(),
        frame.channels() as usize,
        mask,
        |x| encode_roi(x, &p),
        |x| encode_bg(x, &p),
    );
    Ok(EncodedFrame {
        params: p,
        mask: mask.clone(),
        width: frame.width(),
        height: frame.height(),
        channels: frame.channels(),
        pixels,
    })
}

pub fn decode_frame(enc: &EncodedFrame) -> Frame {
    let p = enc.params;
    let pixels = route_rows(
        &enc.pixels,
        enc.width as usize * enc.channels as usize,
        enc.channels as usize,
        &enc.mask,
        |e| decode_roi(e, &p),
        |e| decode_bg(e, &p),
    );
    Frame::new(enc.width, enc.height, enc.channels, p.bit_width, pixels)
        .expect("decoding preserves shape and word range")
}
