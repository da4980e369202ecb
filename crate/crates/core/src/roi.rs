//! RoI mask prediction from the previous frame's detections.
//!
//! Boxes detected at `t-1` are shifted by a per-track constant velocity,
//! grown by a safety margin, clamped to the frame and rasterized onto a
//! block grid. A block is set when any box overlaps it with positive area.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::frame::FrameDims;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RoiError {
    #[error("invalid box ({x1}, {y1}, {x2}, {y2}): need finite x1 < x2 and y1 < y2")]
    Geometry { x1: f64, y1: f64, x2: f64, y2: f64 },
    #[error("confidence {0} outside [0, 1]")]
    Confidence(f64),
    #[error("mask has {actual} bits, grid needs {expected}")]
    MaskSize { expected: usize, actual: usize },
    #[error("block size must be at least 1")]
    BlockSize,
}

/// Axis-aligned detection in pixel coordinates. The box covers the half-open
/// rectangle `[x1, x2) x [y1, y2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectionBox {
    pub x1: f64,
    pub y1: f64,
    pub x2: f64,
    pub y2: f64,
    pub class_id: u32,
    pub confidence: f64,
    pub track_id: Option<u64>,
}

impl DetectionBox {
    pub fn new(
        x1: f64,
        y1: f64,
        x2: f64,
        y2: f64,
        class_id: u32,
        confidence: f64,
    ) -> Result<Self, RoiError> {
        let b = Self {
            x1,
            y1,
            x2,
            y2,
            class_id,
            confidence,
            track_id: None,
        };
        b.validate()?;
        Ok(b)
    }

    pub fn with_track(mut self, track_id: u64) -> Self {
        self.track_id = Some(track_id);
        self
    }

    pub fn validate(&self) -> Result<(), RoiError> {
        let finite = [self.x1, self.y1, self.x2, self.y2]
            .iter()
            .all(|v| v.is_finite());
        if !finite || self.x1 >= self.x2 || self.y1 >= self.y2 {
            return Err(RoiError::Geometry {
                x1: self.x1,
                y1: self.y1,
                x2: self.x2,
                y2: self.y2,
            });
        }
        if !(0.0..=1.0).contains(&self.confidence) {
            return Err(RoiError::Confidence(self.confidence));
        }
        Ok(())
    }

    pub fn width(&self) -> f64 {
        self.x2 - self.x1
    }

    pub fn height(&self) -> f64 {
        self.y2 - self.y1
    }

    pub fn area(&self) -> f64 {
        self.width().max(0.0) * self.height().max(0.0)
    }

    pub fn center(&self) -> (f64, f64) {
        ((self.x1 + self.x2) / 2.0, (self.y1 + self.y2) / 2.0)
    }

    pub fn iou(&self, other: &DetectionBox) -> f64 {
        let iw = (self.x2.min(other.x2) - self.x1.max(other.x1)).max(0.0);
        let ih = (self.y2.min(other.y2) - self.y1.max(other.y1)).max(0.0);
        let inter = iw * ih;
        let union = self.area() + other.area() - inter;
        if union <= 0.0 {
            0.0
        } else {
            inter / union
        }
    }

    /// Intersection with the frame rectangle. May be empty (zero width or
    /// height) when the box lies outside the frame.
    pub fn clamp_to(&self, dims: FrameDims) -> DetectionBox {
        let (w, h) = (dims.width as f64, dims.height as f64);
        let x1 = self.x1.clamp(0.0, w);
        let y1 = self.y1.clamp(0.0, h);
        DetectionBox {
            x1,
            y1,
            x2: self.x2.clamp(x1, w),
            y2: self.y2.clamp(y1, h),
            ..*self
        }
    }
}

/// Detections reported for one frame.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct FrameDetections {
    pub frame_index: u64,
    pub boxes: Vec<DetectionBox>,
}

impl FrameDetections {
    pub fn new(frame_index: u64, boxes: Vec<DetectionBox>) -> Self {
        Self { frame_index, boxes }
    }

    pub fn empty(frame_index: u64) -> Self {
        Self::new(frame_index, Vec::new())
    }
}

/// Per-track center velocity in pixels per frame.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct MotionState {
    pub vx: f64,
    pub vy: f64,
    pub last_seen: u64,
}

impl MotionState {
    pub fn stationary(last_seen: u64) -> Self {
        Self {
            vx: 0.0,
            vy: 0.0,
            last_seen,
        }
    }
}

/// Margin added to each side of a propagated box:
/// `max(abs_floor, rel_fraction * side)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InflationPolicy {
    pub abs_floor: f64,
    pub rel_fraction: f64,
}

impl InflationPolicy {
    pub const NONE: InflationPolicy = InflationPolicy {
        abs_floor: 0.0,
        rel_fraction: 0.0,
    };

    pub fn absolute(px: f64) -> Self {
        Self {
            abs_floor: px,
            rel_fraction: 0.0,
        }
    }
}

impl Default for InflationPolicy {
    fn default() -> Self {
        Self {
            abs_floor: 8.0,
            rel_fraction: 0.1,
        }
    }
}

/// Mask used when there are no usable prior detections.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub enum ColdStart {
    /// Whole frame coded at full precision.
    #[default]
    AllRoi,
    /// Whole frame truncated; ablation only.
    AllBackground,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RoiConfig {
    pub inflation: InflationPolicy,
    pub iou_threshold: f64,
    /// Boxes below this confidence are ignored when building the mask.
    pub confidence_floor: f64,
    pub cold_start: ColdStart,
}

impl Default for RoiConfig {
    fn default() -> Self {
        Self {
            inflation: InflationPolicy::default(),
            iou_threshold: 0.3,
            confidence_floor: 0.0,
            cold_start: ColdStart::AllRoi,
        }
    }
}

/// Block-granularity binary mask, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RoiMask {
    grid_width: u32,
    grid_height: u32,
    block_size: u16,
    bits: Vec<bool>,
}

fn grid_dims(dims: FrameDims, block_size: u16) -> (u32, u32) {
    let b = block_size.max(1) as u32;
    (dims.width.div_ceil(b), dims.height.div_ceil(b))
}

impl RoiMask {
    /// Grid sized for `dims` with every block set to `value`.
    ///
    /// Panics if `block_size` is zero.
    pub fn filled(dims: FrameDims, block_size: u16, value: bool) -> Self {
        assert!(block_size > 0, "block size must be at least 1");
        let (gw, gh) = grid_dims(dims, block_size);
        Self {
            grid_width: gw,
            grid_height: gh,
            block_size,
            bits: vec![value; gw as usize * gh as usize],
        }
    }

    pub fn from_bits(dims: FrameDims, block_size: u16, bits: Vec<bool>) -> Result<Self, RoiError> {
        if block_size == 0 {
            return Err(RoiError::BlockSize);
        }
        let (gw, gh) = grid_dims(dims, block_size);
        let expected = gw as usize * gh as usize;
        if bits.len() != expected {
            return Err(RoiError::MaskSize {
                expected,
                actual: bits.len(),
            });
        }
        Ok(Self {
            grid_width: gw,
            grid_height: gh,
            block_size,
            bits,
        })
    }

    pub fn grid_width(&self) -> u32 {
        self.grid_width
    }

    pub fn grid_height(&self) -> u32 {
        self.grid_height
    }

    pub fn block_size(&self) -> u16 {
        self.block_size
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn get(&self, bx: u32, by: u32) -> bool {
        self.bits[(by * self.grid_width + bx) as usize]
    }

    pub fn set(&mut self, bx: u32, by: u32, value: bool) {
        self.bits[(by * self.grid_width + bx) as usize] = value;
    }

    /// True when the grid is exactly the block tiling of `dims`.
    pub fn covers(&self, dims: FrameDims) -> bool {
        grid_dims(dims, self.block_size) == (self.grid_width, self.grid_height)
    }

    pub fn count_set(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn is_all(&self, value: bool) -> bool {
        self.bits.iter().all(|&b| b == value)
    }

    /// Fraction of frame pixels routed to the RoI path. Edge blocks count
    /// only the pixels that lie inside the frame.
    pub fn pixel_coverage(&self, dims: FrameDims) -> f64 {
        let total = dims.pixel_count();
        if total == 0 {
            return 0.0;
        }
        let b = self.block_size as u32;
        let mut covered = 0usize;
        for by in 0..self.grid_height {
            let h = (dims.height - by * b).min(b) as usize;
            for bx in 0..self.grid_width {
                if self.get(bx, by) {
                    let w = (dims.width - bx * b).min(b) as usize;
                    covered += w * h;
                }
            }
        }
        covered as f64 / total as f64
    }

    /// Sub-grid starting at block `(gx, gy)`. Panics when out of range.
    pub fn crop(&self, gx: u32, gy: u32, gw: u32, gh: u32) -> RoiMask {
        assert!(gx + gw <= self.grid_width && gy + gh <= self.grid_height);
        let mut bits = Vec::with_capacity(gw as usize * gh as usize);
        for by in gy..gy + gh {
            for bx in gx..gx + gw {
                bits.push(self.get(bx, by));
            }
        }
        RoiMask {
            grid_width: gw,
            grid_height: gh,
            block_size: self.block_size,
            bits,
        }
    }

    /// Row-major, MSB-first packing; the tail of the last byte is zero.
    pub fn to_packed(&self) -> Vec<u8> {
        let mut out = vec![0u8; self.bits.len().div_ceil(8)];
        for (i, _) in self.bits.iter().enumerate().filter(|(_, &b)| b) {
            out[i / 8] |= 0x80 >> (i % 8);
        }
        out
    }

    /// Inverse of [`RoiMask::to_packed`]. Returns `None` if `bytes` has the
    /// wrong length or non-zero padding.
    pub fn from_packed(dims: FrameDims, block_size: u16, bytes: &[u8]) -> Option<RoiMask> {
        if block_size == 0 {
            return None;
        }
        let (gw, gh) = grid_dims(dims, block_size);
        let n = gw as usize * gh as usize;
        if bytes.len() != n.div_ceil(8) {
            return None;
        }
        let bits: Vec<bool> = (0..n)
            .map(|i| bytes[i / 8] & (0x80 >> (i % 8)) != 0)
            .collect();
        let mask = RoiMask {
            grid_width: gw,
            grid_height: gh,
            block_size,
            bits,
        };
        (mask.to_packed() == bytes).then_some(mask)
    }
}

/// Greedy one-to-one matching by descending IoU among same-class pairs with
/// IoU strictly above `iou_threshold`. Ties go to the lower previous index,
/// then the lower current index.
pub fn match_tracks(
    prev: &FrameDetections,
    curr: &FrameDetections,
    iou_threshold: f64,
) -> Vec<(usize, usize)> {
    let mut candidates = Vec::new();
    for (i, a) in prev.boxes.iter().enumerate() {
        for (j, b) in curr.boxes.iter().enumerate() {
            if a.class_id != b.class_id {
                continue;
            }
            let iou = a.iou(b);
            if iou > iou_threshold {
                candidates.push((iou, i, j));
            }
        }
    }
    candidates.sort_by(|x, y| y.0.total_cmp(&x.0).then(x.1.cmp(&y.1)).then(x.2.cmp(&y.2)));
    let mut used_prev = vec![false; prev.boxes.len()];
    let mut used_curr = vec![false; curr.boxes.len()];
    let mut pairs = Vec::new();
    for (_, i, j) in candidates {
        if !used_prev[i] && !used_curr[j] {
            used_prev[i] = true;
            used_curr[j] = true;
            pairs.push((i, j));
        }
    }
    pairs
}

/// Velocity from the most recent center displacement. With no earlier
/// observation the track is treated as stationary.
pub fn estimate_velocity(
    previous: Option<(&DetectionBox, u64)>,
    current: (&DetectionBox, u64),
) -> MotionState {
    let (cur, t) = current;
    match previous {
        Some((prev, s)) if t > s => {
            let (px, py) = prev.center();
            let (cx, cy) = cur.center();
            let gap = (t - s) as f64;
            MotionState {
                vx: (cx - px) / gap,
                vy: (cy - py) / gap,
                last_seen: t,
            }
        }
        _ => MotionState::stationary(t),
    }
}

/// Shift every coordinate by `dt * v`.
pub fn propagate_box(b: &DetectionBox, v: &MotionState, dt: f64) -> DetectionBox {
    let (dx, dy) = (v.vx * dt, v.vy * dt);
    DetectionBox {
        x1: b.x1 + dx,
        y1: b.y1 + dy,
        x2: b.x2 + dx,
        y2: b.y2 + dy,
        ..*b
    }
}

pub fn inflate_box(b: &DetectionBox, policy: &InflationPolicy, dims: FrameDims) -> DetectionBox {
    let dx = policy.abs_floor.max(policy.rel_fraction * b.width());
    let dy = policy.abs_floor.max(policy.rel_fraction * b.height());
    DetectionBox {
        x1: b.x1 - dx,
        y1: b.y1 - dy,
        x2: b.x2 + dx,
        y2: b.y2 + dy,
        ..*b
    }
    .clamp_to(dims)
}

/// Sets every block that a box overlaps with positive area.
pub fn rasterize_mask(boxes: &[DetectionBox], dims: FrameDims, block_size: u16) -> RoiMask {
    let mut mask = RoiMask::filled(dims, block_size, false);
    let b = block_size as f64;
    for raw in boxes {
        let r = raw.clamp_to(dims);
        if r.x2 <= r.x1 || r.y2 <= r.y1 {
            continue;
        }
        // Block bx overlaps iff bx*b < x2 and x1 < (bx+1)*b.
        let bx0 = (r.x1 / b).floor() as u32;
        let bx1 = ((r.x2 / b).ceil() as u32).min(mask.grid_width);
        let by0 = (r.y1 / b).floor() as u32;
        let by1 = ((r.y2 / b).ceil() as u32).min(mask.grid_height);
        for by in by0..by1 {
            for bx in bx0..bx1 {
                mask.set(bx, by, true);
            }
        }
    }
    mask
}

/// Predicts the mask for `target_frame` from the detections of an earlier
/// frame: propagate, inflate, rasterize. `motion` is aligned with
/// `prev.boxes`; missing entries count as stationary. With no usable boxes
/// the cold-start mask is returned.
pub fn predict_mask(
    prev: &FrameDetections,
    motion: &[MotionState],
    target_frame: u64,
    dims: FrameDims,
    block_size: u16,
    cfg: &RoiConfig,
) -> RoiMask {
    let dt = target_frame.saturating_sub(prev.frame_index) as f64;
    let boxes: Vec<DetectionBox> = prev
        .boxes
        .iter()
        .enumerate()
        .filter(|(_, b)| b.confidence >= cfg.confidence_floor)
        .map(|(i, b)| {
            let v = motion
                .get(i)
                .copied()
                .unwrap_or_else(|| MotionState::stationary(prev.frame_index));
            inflate_box(&propagate_box(b, &v, dt), &cfg.inflation, dims)
        })
        .collect();
    if boxes.is_empty() {
        return cold_start_mask(dims, block_size, cfg.cold_start);
    }
    rasterize_mask(&boxes, dims, block_size)
}

pub fn cold_start_mask(dims: FrameDims, block_size: u16, policy: ColdStart) -> RoiMask {
    RoiMask::filled(dims, block_size, policy == ColdStart::AllRoi)
}

/// Carries detections between frames and assigns each new box the velocity
/// of the previous box it matches.
#[derive(Debug, Clone)]
pub struct MotionTracker {
    iou_threshold: f64,
    last: Option<FrameDetections>,
}

impl MotionTracker {
    pub fn new(iou_threshold: f64) -> Self {
        Self {
            iou_threshold,
            last: None,
        }
    }

    /// Returns one motion state per box of `dets`.
    pub fn observe(&mut self, dets: &FrameDetections) -> Vec<MotionState> {
        let t = dets.frame_index;
        let mut states: Vec<MotionState> = dets
            .boxes
            .iter()
            .map(|b| estimate_velocity(None, (b, t)))
            .collect();
        if let Some(last) = &self.last {
            for (i, j) in match_tracks(last, dets, self.iou_threshold) {
                states[j] = estimate_velocity(
                    Some((&last.boxes[i], last.frame_index)),
                    (&dets.boxes[j], t),
                );
            }
        }
        self.last = Some(dets.clone());
        states
    }
}
