//! Encoded-frame container.
//!
//! ```text
//! offset size field
//!      0    4 magic "MTMM"
//!      4    1 version (1)
//!      5    1 bit width B
//!      6    1 retained k
//!      7    1 tau
//!      8    2 block size (LE)
//!     10    4 width (LE)
//!     14    4 height (LE)
//!     18    1 channels
//!     19    4 mask byte length (LE)
//!     23    . mask bits, row-major, MSB first, zero padded
//!      .    . pixel words, row-major, ceil(B/8) bytes each (LE)
//! ```

use std::fs;
use std::path::Path;

use super::StreamError;
use crate::bitcodec::{CodingParams, EncodedFrame};
use crate::frame::FrameDims;
use crate::roi::RoiMask;

pub const MAGIC: [u8; 4] = *b"MTMM";
pub const VERSION: u8 = 1;
pub const HEADER_LEN: usize = 23;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ContainerHeader {
    pub version: u8,
    pub bit_width: u8,
    pub retained_k: u8,
    pub tau: u8,
    pub block_size: u16,
    pub width: u32,
    pub height: u32,
    pub channels: u8,
    pub mask_bytes_len: u32,
}

impl ContainerHeader {
    pub fn for_frame(enc: &EncodedFrame) -> Self {
        let p = enc.params();
        let m = enc.mask();
        Self {
            version: VERSION,
            bit_width: p.bit_width(),
            retained_k: p.retained_k(),
            tau: p.tau(),
            block_size: p.block_size(),
            width: enc.width(),
            height: enc.height(),
            channels: enc.channels(),
            mask_bytes_len: mask_bytes(m.grid_width(), m.grid_height()) as u32,
        }
    }

    pub fn to_bytes(&self) -> [u8; HEADER_LEN] {
        let mut out = [0u8; HEADER_LEN];
        out[0..4].copy_from_slice(&MAGIC);
        out[4] = self.version;
        out[5] = self.bit_width;
        out[6] = self.retained_k;
        out[7] = self.tau;
        out[8..10].copy_from_slice(&self.block_size.to_le_bytes());
        out[10..14].copy_from_slice(&self.width.to_le_bytes());
        out[14..18].copy_from_slice(&self.height.to_le_bytes());
        out[18] = self.channels;
        out[19..23].copy_from_slice(&self.mask_bytes_len.to_le_bytes());
        out
    }

    /// Checks magic, version and length; field semantics are validated when
    /// the frame is assembled.
    pub fn parse(data: &[u8]) -> Result<Self, StreamError> {
        if data.len() < MAGIC.len() || data[..4] != MAGIC {
            return Err(StreamError::BadMagic(data[..data.len().min(4)].to_vec()));
        }
        if data.len() < 5 {
            return Err(StreamError::LengthMismatch {
                what: "header",
                expected: HEADER_LEN,
                actual: data.len(),
            });
        }
        if data[4] != VERSION {
            return Err(StreamError::UnsupportedVersion(data[4]));
        }
        if data.len() < HEADER_LEN {
            return Err(StreamError::LengthMismatch {
                what: "header",
                expected: HEADER_LEN,
                actual: data.len(),
            });
        }
        let u16_at = |i: usize| u16::from_le_bytes([data[i], data[i + 1]]);
        let u32_at =
            |i: usize| u32::from_le_bytes([data[i], data[i + 1], data[i + 2], data[i + 3]]);
        Ok(Self {
            version: data[4],
            bit_width: data[5],
            retained_k: data[6],
            tau: data[7],
            block_size: u16_at(8),
            width: u32_at(10),
            height: u32_at(14),
            channels: data[18],
            mask_bytes_len: u32_at(19),
        })
    }
}

fn mask_bytes(grid_width: u32, grid_height: u32) -> usize {
    (grid_width as usize * grid_height as usize).div_ceil(8)
}

fn word_bytes(bit_width: u8) -> usize {
    (bit_width as usize).div_ceil(8)
}

pub fn encode_container(enc: &EncodedFrame) -> Vec<u8> {
    let header = ContainerHeader::for_frame(enc);
    let wb = word_bytes(header.bit_width);
    let mut out =
        Vec::with_capacity(HEADER_LEN + header.mask_bytes_len as usize + enc.pixels().len() * wb);
    out.extend_from_slice(&header.to_bytes());
    out.extend_from_slice(&enc.mask().to_packed());
    for &w in enc.pixels() {
        out.extend_from_slice(&w.to_le_bytes()[..wb]);
    }
    out
}

pub fn decode_container(data: &[u8]) -> Result<EncodedFrame, StreamError> {
    let h = ContainerHeader::parse(data)?;
    let params = CodingParams::with_tau(h.bit_width, h.retained_k, h.tau, h.block_size)?;
    if h.channels != 1 && h.channels != 3 {
        return Err(StreamError::InvalidContainer(format!(
            "channel count {} (expected 1 or 3)",
            h.channels
        )));
    }
    let dims = FrameDims::new(h.width, h.height);
    let b = h.block_size as u32;
    let expected_mask = mask_bytes(h.width.div_ceil(b), h.height.div_ceil(b));
    if h.mask_bytes_len as usize != expected_mask {
        return Err(StreamError::LengthMismatch {
            what: "mask",
            expected: expected_mask,
            actual: h.mask_bytes_len as usize,
        });
    }
    let wb = word_bytes(h.bit_width);
    let words = h.width as usize * h.height as usize * h.channels as usize;
    let expected_total = HEADER_LEN + expected_mask + words * wb;
    if data.len() != expected_total {
        return Err(StreamError::LengthMismatch {
            what: "container",
            expected: expected_total,
            actual: data.len(),
        });
    }
    let mask_end = HEADER_LEN + expected_mask;
    let mask = RoiMask::from_packed(dims, h.block_size, &data[HEADER_LEN..mask_end])
        .ok_or_else(|| StreamError::InvalidContainer("non-zero mask padding bits".into()))?;
    let pixels: Vec<u16> = data[mask_end..]
        .chunks_exact(wb)
        .map(|c| {
            let mut le = [0u8; 2];
            le[..wb].copy_from_slice(c);
            u16::from_le_bytes(le)
        })
        .collect();
    EncodedFrame::new(params, mask, h.width, h.height, h.channels, pixels)
        .map_err(|e| StreamError::InvalidContainer(e.to_string()))
}

pub fn write_encoded(path: impl AsRef<Path>, enc: &EncodedFrame) -> Result<(), StreamError> {
    fs::write(path, encode_container(enc))?;
    Ok(())
}

pub fn read_encoded(path: impl AsRef<Path>) -> Result<EncodedFrame, StreamError> {
    decode_container(&fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bitcodec::encode_frame;
    use crate::frame::Frame;

    fn sample() -> EncodedFrame {
        let q = CodingParams::new(8, 4, 16).unwrap();
        let f = Frame::new(
            64,
            64,
            1,
            8,
            (0..4096).map(|i| (i * 7 % 256) as u16).collect(),
        )
        .unwrap();
        let mut m = RoiMask::filled(f.dims(), 16, false);
        m.set(1, 2, true);
        encode_frame(&f, &m, &q).unwrap()
    }

    #[test]
    fn header_layout() {
        let enc = sample();
        let bytes = encode_container(&enc);
        // 4x4 grid = 16 bits = 2 bytes of mask.
        assert_eq!(
            &bytes[..23],
            &[b'M', b'T', b'M', b'M', 1, 8, 4, 2, 16, 0, 64, 0, 0, 0, 64, 0, 0, 0, 1, 2, 0, 0, 0]
        );
        assert_eq!(&bytes[23..25], &[0b0000_0000, 0b0100_0000]);
        assert_eq!(bytes.len(), 23 + 2 + 4096);
        assert_eq!(decode_container(&bytes).unwrap(), enc);
    }

    #[test]
    fn wide_words_take_two_bytes() {
        let q = CodingParams::new(12, 6, 4).unwrap();
        let f = Frame::new(3, 1, 1, 12, vec![0xabc, 0, 0xfff]).unwrap();
        let m = RoiMask::filled(f.dims(), 4, true);
        let enc = encode_frame(&f, &m, &q).unwrap();
        let bytes = encode_container(&enc);
        assert_eq!(bytes.len(), 23 + 1 + 6);
        let first = enc.pixels()[0].to_le_bytes();
        assert_eq!(&bytes[24..26], &first);
        assert_eq!(decode_container(&bytes).unwrap(), enc);
    }

    #[test]
    fn bad_magic() {
        let mut bytes = encode_container(&sample());
        bytes[0] = b'X';
        assert!(matches!(
            decode_container(&bytes),
            Err(StreamError::BadMagic(_))
        ));
        assert!(matches!(
            decode_container(b"MT"),
            Err(StreamError::BadMagic(_))
        ));
    }

    #[test]
    fn unsupported_version() {
        let mut bytes = encode_container(&sample());
        bytes[4] = 2;
        assert!(matches!(
            decode_container(&bytes),
            Err(StreamError::UnsupportedVersion(2))
        ));
    }

    #[test]
    fn length_mismatches() {
        let bytes = encode_container(&sample());
        assert!(matches!(
            decode_container(&bytes[..bytes.len() - 1]),
            Err(StreamError::LengthMismatch {
                what: "container",
                ..
            })
        ));
        assert!(matches!(
            decode_container(&bytes[..10]),
            Err(StreamError::LengthMismatch { what: "header", .. })
        ));
        let mut longer = bytes.clone();
        longer.push(0);
        assert!(matches!(
            decode_container(&longer),
            Err(StreamError::LengthMismatch { .. })
        ));
        let mut wrong_mask = bytes.clone();
        wrong_mask[19] = 3;
        assert!(matches!(
            decode_container(&wrong_mask),
            Err(StreamError::LengthMismatch { what: "mask", .. })
        ));
    }

    #[test]
    fn invalid_params_and_pixels() {
        let mut bytes = encode_container(&sample());
        bytes[6] = 8;
        assert!(matches!(
            decode_container(&bytes),
            Err(StreamError::InvalidParams(_))
        ));

        let q = CodingParams::new(4, 2, 4).unwrap();
        let f = Frame::new(2, 1, 1, 4, vec![1, 2]).unwrap();
        let enc = encode_frame(&f, &RoiMask::filled(f.dims(), 4, true), &q).unwrap();
        let mut bytes = encode_container(&enc);
        let last = bytes.len() - 1;
        bytes[last] = 0x20;
        assert!(matches!(
            decode_container(&bytes),
            Err(StreamError::InvalidContainer(_))
        ));
    }
}
