//! RoI-guided hybrid bit coding for camera-to-memory interfaces.
//!
//! Pixels predicted to contain objects keep full precision with their dense
//! top bits complemented; everything else is truncated to the top `k` bits
//! and shaped the same way. The inversion decision rides in each word's LSB,
//! so the stored width never changes and decoding is a single XOR.
//!
//! - [`bitcodec`]: word transforms and mask-routed frame encode/decode.
//! - [`roi`]: mask prediction from the previous frame's detections.
//! - [`metrics`]: bit-1 density, normalized density, transition activity, PSNR.
//! - [`stream`]: PNM frames, the encoded container, detection records.
//! - [`pipeline`]: closed-loop harness, k sweeps, variant comparison, corpus.

pub mod bitcodec;
pub mod frame;
pub mod metrics;
pub mod pipeline;
pub mod roi;
pub mod stream;

pub use bitcodec::{decode_frame, encode_frame, CodecError, CodingParams, EncodedFrame};
pub use frame::{Frame, FrameDims, FrameError};
pub use metrics::{ActivityReport, BitStream, MetricsError};
pub use roi::{DetectionBox, FrameDetections, MotionState, RoiConfig, RoiMask};
