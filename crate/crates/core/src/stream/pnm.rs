//! Binary PGM (P5) and PPM (P6) frames.
//!
//! Samples are one byte when maxval < 256 and two bytes big-endian otherwise.
//! The bit width of the frame is recovered from maxval, which must be of the
//! form `2^B - 1`.

use std::fs;
use std::path::Path;

use super::StreamError;
use crate::frame::{max_word, Frame};

pub fn write_frame(path: impl AsRef<Path>, frame: &Frame) -> Result<(), StreamError> {
    fs::write(path, encode_pnm(frame))?;
    Ok(())
}

pub fn read_frame(path: impl AsRef<Path>) -> Result<Frame, StreamError> {
    parse_pnm(&fs::read(path)?)
}

pub fn encode_pnm(frame: &Frame) -> Vec<u8> {
    let magic = if frame.channels() == 1 { "P5" } else { "P6" };
    let maxval = max_word(frame.bit_width());
    let mut out = format!("{magic}\n{} {}\n{maxval}\n", frame.width(), frame.height()).into_bytes();
    if maxval < 256 {
        out.extend(frame.pixels().iter().map(|&v| v as u8));
    } else {
        for &v in frame.pixels() {
            out.extend_from_slice(&v.to_be_bytes());
        }
    }
    out
}

struct Cursor<'a> {
    data: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn err(&self, message: impl Into<String>) -> StreamError {
        StreamError::Parse {
            offset: self.pos,
            message: message.into(),
        }
    }

    fn skip_space_and_comments(&mut self) {
        while let Some(&c) = self.data.get(self.pos) {
            if c == b'#' {
                while self.data.get(self.pos).is_some_and(|&c| c != b'\n') {
                    self.pos += 1;
                }
            } else if c.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn number(&mut self, what: &str) -> Result<u32, StreamError> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self.data.get(self.pos).is_some_and(u8::is_ascii_digit) {
            self.pos += 1;
        }
        if start == self.pos {
            self.pos = start;
            return Err(self.err(format!("expected {what}")));
        }
        std::str::from_utf8(&self.data[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| StreamError::Parse {
                offset: start,
                message: format!("{what} out of range"),
            })
    }
}

pub fn parse_pnm(data: &[u8]) -> Result<Frame, StreamError> {
    let mut cur = Cursor { data, pos: 0 };
    let channels = match data.get(..2) {
        Some(b"P5") => 1u8,
        Some(b"P6") => 3u8,
        _ => return Err(cur.err("expected magic P5 or P6")),
    };
    cur.pos = 2;
    let width = cur.number("width")?;
    let height = cur.number("height")?;
    let maxval_offset = cur.pos;
    let maxval = cur.number("maxval")?;
    if width == 0 || height == 0 {
        return Err(StreamError::Parse {
            offset: maxval_offset,
            message: format!("zero-sized image {width}x{height}"),
        });
    }
    if maxval == 0 || maxval > u16::MAX as u32 || !(maxval + 1).is_power_of_two() {
        return Err(StreamError::UnsupportedMaxval(maxval));
    }
    let bit_width = (maxval + 1).trailing_zeros() as u8;
    match data.get(cur.pos) {
        Some(c) if c.is_ascii_whitespace() => cur.pos += 1,
        _ => return Err(cur.err("expected single whitespace after maxval")),
    }

    let samples = width as usize * height as usize * channels as usize;
    let bytes_per = if maxval < 256 { 1 } else { 2 };
    let payload = &data[cur.pos..];
    let need = samples * bytes_per;
    if payload.len() < need {
        // First missing byte.
        return Err(StreamError::Parse {
            offset: data.len(),
            message: format!(
                "pixel data truncated: need {need} bytes, found {}",
                payload.len()
            ),
        });
    }
    let mut pixels = Vec::with_capacity(samples);
    for (i, chunk) in payload[..need].chunks_exact(bytes_per).enumerate() {
        let v = if bytes_per == 1 {
            chunk[0] as u16
        } else {
            u16::from_be_bytes([chunk[0], chunk[1]])
        };
        if v as u32 > maxval {
            return Err(StreamError::Parse {
                offset: cur.pos + i * bytes_per,
                message: format!("sample {v} exceeds maxval {maxval}"),
            });
        }
        pixels.push(v);
    }
    Frame::new(width, height, channels, bit_width, pixels).map_err(|e| StreamError::Parse {
        offset: cur.pos,
        message: e.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_p5() {
        let mut data = b"P5\n2 2\n255\n".to_vec();
        data.extend_from_slice(&[0, 64, 128, 255]);
        let f = parse_pnm(&data).unwrap();
        assert_eq!(
            (f.width(), f.height(), f.channels(), f.bit_width()),
            (2, 2, 1, 8)
        );
        assert_eq!(f.pixels(), &[0, 64, 128, 255]);
        assert_eq!(encode_pnm(&f), data);
    }

    #[test]
    fn comments_and_extra_whitespace() {
        let mut data = b"P6 # made by hand\n  1\t1 # size\n255\n".to_vec();
        data.extend_from_slice(&[1, 2, 3]);
        let f = parse_pnm(&data).unwrap();
        assert_eq!(f.pixels(), &[1, 2, 3]);
    }

    #[test]
    fn sixteen_bit_samples_are_big_endian() {
        let mut data = b"P5\n2 1\n1023\n".to_vec();
        data.extend_from_slice(&[0x03, 0xff, 0x01, 0x00]);
        let f = parse_pnm(&data).unwrap();
        assert_eq!(f.bit_width(), 10);
        assert_eq!(f.pixels(), &[1023, 256]);
        assert_eq!(encode_pnm(&f), data);
    }

    #[test]
    fn truncated_payload_reports_offset() {
        let mut data = b"P5\n2 2\n255\n".to_vec();
        data.extend_from_slice(&[1, 2, 3]);
        match parse_pnm(&data) {
            Err(StreamError::Parse { offset, .. }) => assert_eq!(offset, 14),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn rejects_non_power_of_two_maxval() {
        let data = b"P5\n1 1\n200\n\x05";
        assert!(matches!(
            parse_pnm(data),
            Err(StreamError::UnsupportedMaxval(200))
        ));
    }

    #[test]
    fn rejects_sample_above_maxval() {
        let data = b"P5\n2 1\n15\n\x03\x10";
        match parse_pnm(data) {
            Err(StreamError::Parse { offset, .. }) => assert_eq!(offset, 11),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn rejects_bad_magic_and_missing_fields() {
        assert!(matches!(
            parse_pnm(b"P2\n1 1\n255\n0"),
            Err(StreamError::Parse { offset: 0, .. })
        ));
        assert!(matches!(
            parse_pnm(b"P5\n1 \n"),
            Err(StreamError::Parse { offset: 6, .. })
        ));
        assert!(matches!(
            parse_pnm(b"P5\n0 1\n255\n"),
            Err(StreamError::Parse { .. })
        ));
    }
}
