//! File formats: binary PNM frames, the encoded-frame container and
//! line-delimited detection records.

use thiserror::Error;

use crate::bitcodec::CodecError;

pub mod container;
pub mod detections;
pub mod pnm;

pub use container::{read_encoded, write_encoded, ContainerHeader};
pub use detections::{read_detections, write_detections};
pub use pnm::{read_frame, write_frame};

#[derive(Debug, Error)]
pub enum StreamError {
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("parse error at byte {offset}: {message}")]
    Parse { offset: usize, message: String },
    #[error("unsupported maxval {0}: must be 2^B - 1 for B in 1..=16")]
    UnsupportedMaxval(u32),
    #[error("bad magic {0:02x?}, expected \"MTMM\"")]
    BadMagic(Vec<u8>),
    #[error("unsupported container version {0}")]
    UnsupportedVersion(u8),
    #[error("length mismatch in {what}: expected {expected} bytes, found {actual}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        actual: usize,
    },
    #[error("invalid container: {0}")]
    InvalidContainer(String),
    #[error("invalid coding parameters: {0}")]
    InvalidParams(#[from] CodecError),
    #[error("line {line}: {message}")]
    DetectionParse { line: usize, message: String },
    #[error("line {line}: frame index {frame} follows {previous}")]
    OrderError {
        line: usize,
        frame: u64,
        previous: u64,
    },
}
