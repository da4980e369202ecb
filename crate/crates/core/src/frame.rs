//! Raster of fixed-width pixel words.

use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FrameError {
    #[error("bit width {0} outside 1..=16")]
    BitWidth(u8),
    #[error("channel count {0} not supported (expected 1 or 3)")]
    Channels(u8),
    #[error("pixel count {actual} does not match {width}x{height}x{channels}")]
    PixelCount {
        width: u32,
        height: u32,
        channels: u8,
        actual: usize,
    },
    #[error("pixel value {value} at index {index} does not fit in {bit_width} bits")]
    PixelRange {
        index: usize,
        value: u16,
        bit_width: u8,
    },
    #[error("crop window {x}+{w},{y}+{h} exceeds {width}x{height}")]
    Crop {
        x: u32,
        y: u32,
        w: u32,
        h: u32,
        width: u32,
        height: u32,
    },
}

/// Frame width and height in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct FrameDims {
    pub width: u32,
    pub height: u32,
}

impl FrameDims {
    pub fn new(width: u32, height: u32) -> Self {
        Self { width, height }
    }

    pub fn pixel_count(&self) -> usize {
        self.width as usize * self.height as usize
    }
}

/// Row-major, channel-interleaved raster of `bit_width`-bit words.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frame {
    width: u32,
    height: u32,
    channels: u8,
    bit_width: u8,
    pixels: Vec<u16>,
}

impl Frame {
    pub fn new(
        width: u32,
        height: u32,
        channels: u8,
        bit_width: u8,
        pixels: Vec<u16>,
    ) -> Result<Self, FrameError> {
        if !(1..=16).contains(&bit_width) {
            return Err(FrameError::BitWidth(bit_width));
        }
        if channels != 1 && channels != 3 {
            return Err(FrameError::Channels(channels));
        }
        let expected = width as usize * height as usize * channels as usize;
        if pixels.len() != expected {
            return Err(FrameError::PixelCount {
                width,
                height,
                channels,
                actual: pixels.len(),
            });
        }
        let max = max_word(bit_width);
        if let Some((index, &value)) = pixels.iter().enumerate().find(|(_, &v)| v > max) {
            return Err(FrameError::PixelRange {
                index,
                value,
                bit_width,
            });
        }
        Ok(Self {
            width,
            height,
            channels,
            bit_width,
            pixels,
        })
    }

    /// A frame with every word set to zero.
    pub fn zeros(width: u32, height: u32, channels: u8, bit_width: u8) -> Result<Self, FrameError> {
        let len = width as usize * height as usize * channels as usize;
        Self::new(width, height, channels, bit_width, vec![0; len])
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn dims(&self) -> FrameDims {
        FrameDims::new(self.width, self.height)
    }

    pub fn channels(&self) -> u8 {
        self.channels
    }

    pub fn bit_width(&self) -> u8 {
        self.bit_width
    }

    pub fn pixels(&self) -> &[u16] {
        &self.pixels
    }

    pub fn into_pixels(self) -> Vec<u16> {
        self.pixels
    }

    /// Words per row (width times channels).
    pub fn row_len(&self) -> usize {
        self.width as usize * self.channels as usize
    }

    pub fn same_shape(&self, other: &Frame) -> bool {
        self.width == other.width
            && self.height == other.height
            && self.channels == other.channels
            && self.bit_width == other.bit_width
    }

    /// Words of pixel `(x, y)`, one per channel.
    pub fn pixel(&self, x: u32, y: u32) -> &[u16] {
        let c = self.channels as usize;
        let start = (y as usize * self.width as usize + x as usize) * c;
        &self.pixels[start..start + c]
    }

    pub fn crop(&self, x: u32, y: u32, w: u32, h: u32) -> Result<Frame, FrameError> {
        if x.checked_add(w).is_none_or(|e| e > self.width)
            || y.checked_add(h).is_none_or(|e| e > self.height)
        {
            return Err(FrameError::Crop {
                x,
                y,
                w,
                h,
                width: self.width,
                height: self.height,
            });
        }
        let c = self.channels as usize;
        let mut pixels = Vec::with_capacity(w as usize * h as usize * c);
        for row in y..y + h {
            let start = (row as usize * self.width as usize + x as usize) * c;
            pixels.extend_from_slice(&self.pixels[start..start + w as usize * c]);
        }
        Ok(Frame {
            width: w,
            height: h,
            channels: self.channels,
            bit_width: self.bit_width,
            pixels,
        })
    }
}

/// Largest value representable in `bit_width` bits.
pub fn max_word(bit_width: u8) -> u16 {
    ((1u32 << bit_width) - 1) as u16
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_wrong_pixel_count() {
        let err = Frame::new(2, 2, 1, 8, vec![0; 3]).unwrap_err();
        assert!(matches!(err, FrameError::PixelCount { actual: 3, .. }));
    }

    #[test]
    fn rejects_out_of_range_word() {
        let err = Frame::new(1, 1, 1, 4, vec![16]).unwrap_err();
        assert_eq!(
            err,
            FrameError::PixelRange {
                index: 0,
                value: 16,
                bit_width: 4
            }
        );
    }

    #[test]
    fn rejects_two_channels() {
        assert_eq!(
            Frame::new(1, 1, 2, 8, vec![0, 0]).unwrap_err(),
            FrameError::Channels(2)
        );
    }

    #[test]
    fn crop_extracts_window() {
        let pixels: Vec<u16> = (0..12).collect();
        let f = Frame::new(4, 3, 1, 8, pixels).unwrap();
        let c = f.crop(1, 1, 2, 2).unwrap();
        assert_eq!(c.pixels(), &[5, 6, 9, 10]);
        assert!(f.crop(3, 0, 2, 1).is_err());
    }

    #[test]
    fn pixel_returns_all_channels() {
        let pixels: Vec<u16> = (0..12).collect();
        let f = Frame::new(2, 2, 3, 8, pixels).unwrap();
        assert_eq!(f.pixel(1, 1), &[9, 10, 11]);
    }
}
