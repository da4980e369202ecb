//! Closed-loop harness.
//!
//! For each frame `t` the mask comes from detections on frame `t-1`
//! (all-RoI at cold start), the frame is encoded and decoded, metrics are
//! recorded, and the detector stub produces detections for `t` that feed
//! the next mask. Frames are processed strictly in order; work inside a
//! frame runs on the rayon pool.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::bitcodec::{self, decode_frame, encode_frame, CodecError, CodingParams};
use crate::frame::{Frame, FrameDims};
use crate::metrics::{ActivityReport, MetricsError, DEFAULT_WORD_WIDTH};
use crate::roi::{self, FrameDetections, MotionState, MotionTracker, RoiConfig, RoiMask};

pub mod corpus;
pub mod detector;
pub mod report;

pub use detector::{oracle_detector, DetectorConfig};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("alignment error: {0}")]
    Alignment(String),
    #[error("empty frame sequence")]
    NoFrames,
    #[error("invalid k range {start}..={end} for {bit_width}-bit frames")]
    KRange { start: u8, end: u8, bit_width: u8 },
    #[error(transparent)]
    Codec(#[from] CodecError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

/// Which coding path a run applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Variant {
    /// Predicted mask routes pixels between RoI and background coding.
    MotiMem,
    /// Every pixel takes the background path (truncation with inversion).
    GlobalK,
    /// Truncation only: no inversion, no flag.
    UniformK,
    /// Unmodified frames.
    Raw,
}

impl Variant {
    pub const ALL: [Variant; 4] = [
        Variant::MotiMem,
        Variant::GlobalK,
        Variant::UniformK,
        Variant::Raw,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Variant::MotiMem => "motimem",
            Variant::GlobalK => "global_k",
            Variant::UniformK => "uniform_k",
            Variant::Raw => "raw",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| {
                format!("unknown variant {s:?} (expected motimem, global_k, uniform_k or raw)")
            })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PipelineConfig {
    pub retained_k: u8,
    /// `None` selects `floor(k / 2)`.
    pub tau: Option<u8>,
    pub block_size: u16,
    pub roi: RoiConfig,
    pub detector: DetectorConfig,
    pub seed: u64,
    pub word_width: u32,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            retained_k: 4,
            tau: None,
            block_size: 16,
            roi: RoiConfig::default(),
            detector: DetectorConfig::default(),
            seed: 42,
            word_width: DEFAULT_WORD_WIDTH,
        }
    }
}

impl PipelineConfig {
    pub fn params(&self, bit_width: u8) -> Result<CodingParams, CodecError> {
        self.params_for_k(bit_width, self.retained_k)
    }

    pub fn params_for_k(&self, bit_width: u8, k: u8) -> Result<CodingParams, CodecError> {
        match self.tau {
            Some(tau) => CodingParams::with_tau(bit_width, k, tau, self.block_size),
            None => CodingParams::new(bit_width, k, self.block_size),
        }
    }
}

/// Means over the per-frame rows of a run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Aggregates {
    pub frames: usize,
    /// Mean over frames whose NBD is defined; `None` if there are none.
    pub mean_nbd: Option<f64>,
    pub mean_raw_density: f64,
    pub mean_enc_density: f64,
    pub mean_alpha_raw: f64,
    pub mean_alpha_enc: f64,
    pub mean_mse: f64,
    /// Infinite when any frame decodes exactly.
    pub mean_psnr_db: f64,
    pub mean_mask_coverage: f64,
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

impl Aggregates {
    pub fn from_rows(rows: &[ActivityReport]) -> Self {
        let m = |f: fn(&ActivityReport) -> f64| mean(rows.iter().map(f)).unwrap_or(0.0);
        Self {
            frames: rows.len(),
            mean_nbd: mean(rows.iter().filter_map(|r| r.nbd)),
            mean_raw_density: m(|r| r.raw_bit1_density),
            mean_enc_density: m(|r| r.enc_bit1_density),
            mean_alpha_raw: m(|r| r.alpha_raw),
            mean_alpha_enc: m(|r| r.alpha_enc),
            mean_mse: m(|r| r.mse),
            mean_psnr_db: m(|r| r.psnr_db),
            mean_mask_coverage: m(|r| r.mask_coverage.unwrap_or(0.0)),
        }
    }
}

/// Result of one closed-loop run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub variant: Variant,
    pub params: CodingParams,
    pub rows: Vec<ActivityReport>,
    /// Mask applied at each frame.
    pub masks: Vec<RoiMask>,
    pub aggregates: Aggregates,
}

/// Per-k runs of one variant.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSummary {
    pub variant: Variant,
    pub points: Vec<RunSummary>,
}

/// How often the MotiMem NBD landed strictly between the Global-k NBD and 1
/// on frames whose mask was mixed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct OrderingCheck {
    pub mixed_frames: usize,
    pub between: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub runs: Vec<RunSummary>,
    pub ordering: OrderingCheck,
}

impl Comparison {
    pub fn run(&self, variant: Variant) -> Option<&RunSummary> {
        self.runs.iter().find(|r| r.variant == variant)
    }
}

/// Checks the two sequences line up and pads missing trailing detection
/// sets with empty ones.
fn align(frames: &[Frame], gt: &[FrameDetections]) -> Result<Vec<FrameDetections>, PipelineError> {
    let first = frames.first().ok_or(PipelineError::NoFrames)?;
    if let Some((i, f)) = frames
        .iter()
        .enumerate()
        .find(|(_, f)| !f.same_shape(first))
    {
        return Err(PipelineError::Alignment(format!(
            "frame {i} is {}x{}x{} ({} bit), frame 0 is {}x{}x{} ({} bit)",
            f.width(),
            f.height(),
            f.channels(),
            f.bit_width(),
            first.width(),
            first.height(),
            first.channels(),
            first.bit_width()
        )));
    }
    if gt.len() > frames.len() {
        return Err(PipelineError::Alignment(format!(
            "{} detection frames for {} image frames",
            gt.len(),
            frames.len()
        )));
    }
    if let Some((i, d)) = gt
        .iter()
        .enumerate()
        .find(|(i, d)| d.frame_index != *i as u64)
    {
        return Err(PipelineError::Alignment(format!(
            "detection set {i} carries frame index {}",
            d.frame_index
        )));
    }
    if gt.len() < frames.len() {
        log::warn!(
            "{} detection frames for {} image frames; padding with empty sets",
            gt.len(),
            frames.len()
        );
    }
    let mut out = gt.to_vec();
    out.extend((gt.len()..frames.len()).map(|i| FrameDetections::empty(i as u64)));
    Ok(out)
}

fn map_words(frame: &Frame, f: impl Fn(u16) -> u16 + Sync + Send) -> Frame {
    let pixels: Vec<u16> = frame.pixels().par_iter().map(|&x| f(x)).collect();
    Frame::new(
        frame.width(),
        frame.height(),
        frame.channels(),
        frame.bit_width(),
        pixels,
    )
    .expect("word map preserves shape")
}

/// Encode, decode and measure one frame under `variant`.
fn code_frame(
    t: u64,
    frame: &Frame,
    mask: &RoiMask,
    params: &CodingParams,
    variant: Variant,
    word_width: u32,
) -> Result<ActivityReport, PipelineError> {
    let dims = frame.dims();
    let (encoded, decoded, coverage) = match variant {
        Variant::MotiMem | Variant::GlobalK => {
            let enc = encode_frame(frame, mask, params)?;
            let dec = decode_frame(&enc);
            (enc.as_frame(), dec, mask.pixel_coverage(dims))
        }
        Variant::UniformK => {
            let p = *params;
            let t = map_words(frame, |x| bitcodec::truncate_k(x, &p));
            (t.clone(), t, 0.0)
        }
        Variant::Raw => (frame.clone(), frame.clone(), 1.0),
    };
    Ok(ActivityReport::measure(
        t,
        frame,
        &encoded,
        &decoded,
        word_width,
        Some(coverage),
    )?)
}

/// Runs the loop for one variant at the configured k.
pub fn run_variant(
    frames: &[Frame],
    gt: &[FrameDetections],
    cfg: &PipelineConfig,
    variant: Variant,
) -> Result<RunSummary, PipelineError> {
    let gt = align(frames, gt)?;
    let params = cfg.params(frames[0].bit_width())?;
    run_aligned(frames, &gt, cfg, &params, variant)
}

/// Closed-loop MotiMem run.
pub fn run_closed_loop(
    frames: &[Frame],
    gt: &[FrameDetections],
    cfg: &PipelineConfig,
) -> Result<RunSummary, PipelineError> {
    run_variant(frames, gt, cfg, Variant::MotiMem)
}

fn run_aligned(
    frames: &[Frame],
    gt: &[FrameDetections],
    cfg: &PipelineConfig,
    params: &CodingParams,
    variant: Variant,
) -> Result<RunSummary, PipelineError> {
    let dims: FrameDims = frames[0].dims();
    let block = params.block_size();
    let mut tracker = MotionTracker::new(cfg.roi.iou_threshold);
    let mut prior: Option<(FrameDetections, Vec<MotionState>)> = None;
    let mut rows = Vec::with_capacity(frames.len());
    let mut masks = Vec::with_capacity(frames.len());

    for (t, frame) in frames.iter().enumerate() {
        let t = t as u64;
        let mask = match variant {
            Variant::MotiMem => match &prior {
                None => roi::cold_start_mask(dims, block, cfg.roi.cold_start),
                Some((dets, motion)) => roi::predict_mask(dets, motion, t, dims, block, &cfg.roi),
            },
            Variant::GlobalK | Variant::UniformK => RoiMask::filled(dims, block, false),
            Variant::Raw => RoiMask::filled(dims, block, true),
        };
        let row = code_frame(t, frame, &mask, params, variant, cfg.word_width)?;
        log::debug!(
            "{variant} k={} frame {t}: enc density {:.4}, coverage {:.3}",
            params.retained_k(),
            row.enc_bit1_density,
            row.mask_coverage.unwrap_or(0.0)
        );
        rows.push(row);
        masks.push(mask);

        if variant == Variant::MotiMem {
            // Detections on frame t become the prior for t + 1.
            let dets = oracle_detector(&gt[t as usize], dims, &cfg.detector, cfg.seed);
            let motion = tracker.observe(&dets);
            prior = Some((dets, motion));
        }
    }
    let aggregates = Aggregates::from_rows(&rows);
    Ok(RunSummary {
        variant,
        params: *params,
        rows,
        masks,
        aggregates,
    })
}

/// Independent runs for every k in `k_start..=k_end`, same seed each time.
/// With no tau override each point uses `floor(k / 2)`.
pub fn run_sweep(
    frames: &[Frame],
    gt: &[FrameDetections],
    cfg: &PipelineConfig,
    variant: Variant,
    k_start: u8,
    k_end: u8,
) -> Result<SweepSummary, PipelineError> {
    let gt = align(frames, gt)?;
    let bit_width = frames[0].bit_width();
    if k_start == 0 || k_start > k_end || k_end >= bit_width {
        return Err(PipelineError::KRange {
            start: k_start,
            end: k_end,
            bit_width,
        });
    }
    let params = (k_start..=k_end)
        .map(|k| cfg.params_for_k(bit_width, k))
        .collect::<Result<Vec<_>, _>>()?;
    let points = params
        .par_iter()
        .map(|p| run_aligned(frames, &gt, cfg, p, variant))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(SweepSummary { variant, points })
}

/// Runs all four variants on the same inputs.
pub fn compare_variants(
    frames: &[Frame],
    gt: &[FrameDetections],
    cfg: &PipelineConfig,
) -> Result<Comparison, PipelineError> {
    let gt = align(frames, gt)?;
    let params = cfg.params(frames[0].bit_width())?;
    let runs = Variant::ALL
        .par_iter()
        .map(|&v| run_aligned(frames, &gt, cfg, &params, v))
        .collect::<Result<Vec<_>, _>>()?;
    let moti = &runs[0];
    let global = &runs[1];
    let mut ordering = OrderingCheck {
        mixed_frames: 0,
        between: 0,
    };
    for ((m, g), mask) in moti.rows.iter().zip(&global.rows).zip(&moti.masks) {
        if mask.is_all(true) || mask.is_all(false) {
            continue;
        }
        if let (Some(mn), Some(gn)) = (m.nbd, g.nbd) {
            ordering.mixed_frames += 1;
            if gn < mn && mn < 1.0 {
                ordering.between += 1;
            }
        }
    }
    Ok(Comparison { runs, ordering })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::roi::{DetectionBox, InflationPolicy};

    fn textured(w: u32, h: u32, salt: u16) -> Frame {
        let px = (0..w * h * 3)
            .map(|i| ((i as u16).wrapping_mul(37).wrapping_add(salt * 11)) % 256)
            .collect();
        Frame::new(w, h, 3, 8, px).unwrap()
    }

    fn one_box(t: u64) -> FrameDetections {
        FrameDetections::new(
            t,
            vec![DetectionBox::new(8., 8., 24., 20., 0, 0.9).unwrap()],
        )
    }

    fn still_cfg() -> PipelineConfig {
        PipelineConfig {
            detector: DetectorConfig::PERFECT,
            roi: RoiConfig {
                inflation: InflationPolicy::absolute(4.0),
                ..RoiConfig::default()
            },
            block_size: 8,
            ..PipelineConfig::default()
        }
    }

    #[test]
    fn single_frame_uses_cold_start() {
        let f = textured(32, 32, 0);
        let s = run_closed_loop(std::slice::from_ref(&f), &[one_box(0)], &still_cfg()).unwrap();
        assert!(s.masks[0].is_all(true));
        let enc = encode_frame(&f, &s.masks[0], &s.params).unwrap();
        let want =
            ActivityReport::measure(0, &f, &enc.as_frame(), &decode_frame(&enc), 8, Some(1.0))
                .unwrap();
        assert_eq!(s.rows[0], want);
    }

    #[test]
    fn second_frame_mask_is_inflated_prior_box() {
        let f = textured(32, 32, 0);
        let frames = vec![f.clone(), f];
        let s = run_closed_loop(&frames, &[one_box(0), one_box(1)], &still_cfg()).unwrap();
        let want = roi::rasterize_mask(
            &[DetectionBox::new(4., 4., 28., 24., 0, 0.9).unwrap()],
            FrameDims::new(32, 32),
            8,
        );
        assert_eq!(s.masks[1], want);
    }

    #[test]
    fn empty_scene_stays_on_fallback() {
        let frames: Vec<_> = (0..4).map(|i| textured(24, 16, i)).collect();
        let s = run_closed_loop(&frames, &[], &still_cfg()).unwrap();
        assert!(s.masks.iter().all(|m| m.is_all(true)));
    }

    #[test]
    fn alignment_errors() {
        let frames = vec![textured(16, 16, 0)];
        let cfg = still_cfg();
        assert!(matches!(
            run_closed_loop(&frames, &[one_box(0), one_box(1)], &cfg),
            Err(PipelineError::Alignment(_))
        ));
        assert!(matches!(
            run_closed_loop(&frames, &[one_box(3)], &cfg),
            Err(PipelineError::Alignment(_))
        ));
        let mixed = vec![textured(16, 16, 0), textured(8, 16, 0)];
        assert!(matches!(
            run_closed_loop(&mixed, &[], &cfg),
            Err(PipelineError::Alignment(_))
        ));
        assert!(matches!(
            run_closed_loop(&[], &[], &cfg),
            Err(PipelineError::NoFrames)
        ));
    }

    #[test]
    fn sweep_single_point_equals_single_run() {
        let frames: Vec<_> = (0..3).map(|i| textured(32, 32, i)).collect();
        let gt: Vec<_> = (0..3).map(one_box).collect();
        let cfg = still_cfg();
        let sweep = run_sweep(&frames, &gt, &cfg, Variant::MotiMem, 4, 4).unwrap();
        assert_eq!(sweep.points.len(), 1);
        assert_eq!(
            sweep.points[0],
            run_closed_loop(&frames, &gt, &cfg).unwrap()
        );
        assert!(matches!(
            run_sweep(&frames, &gt, &cfg, Variant::MotiMem, 1, 8),
            Err(PipelineError::KRange { .. })
        ));
    }

    #[test]
    fn compare_produces_four_variants() {
        let frames: Vec<_> = (0..3).map(|i| textured(32, 32, i)).collect();
        let gt: Vec<_> = (0..3).map(one_box).collect();
        let c = compare_variants(&frames, &gt, &still_cfg()).unwrap();
        let names: Vec<_> = c.runs.iter().map(|r| r.variant).collect();
        assert_eq!(names, Variant::ALL);
        let raw = c.run(Variant::Raw).unwrap();
        assert!(raw.rows.iter().all(|r| r.nbd == Some(1.0)));
        let uni = c.run(Variant::UniformK).unwrap();
        for (row, f) in uni.rows.iter().zip(&frames) {
            let ones: u64 = f
                .pixels()
                .iter()
                .map(|&x| {
                    bitcodec::top_k_weight(bitcodec::truncate_k(x, &uni.params), &uni.params) as u64
                })
                .sum();
            assert_eq!(row.enc_ones, ones);
        }
        let g = c.run(Variant::GlobalK).unwrap();
        assert!(g.rows.iter().all(|r| r.enc_bit1_density <= 0.375));
    }

    #[test]
    fn aggregates_match_rows() {
        let frames: Vec<_> = (0..5).map(|i| textured(32, 32, i)).collect();
        let s = run_closed_loop(&frames, &[], &still_cfg()).unwrap();
        let n = s.rows.len() as f64;
        let nbd: f64 = s.rows.iter().map(|r| r.nbd.unwrap()).sum::<f64>() / n;
        assert!((s.aggregates.mean_nbd.unwrap() - nbd).abs() < 1e-12);
        let psnr: f64 = s.rows.iter().map(|r| r.psnr_db).sum::<f64>() / n;
        assert!((s.aggregates.mean_psnr_db - psnr).abs() < 1e-9);
        assert_eq!(s.aggregates.frames, 5);
    }

    #[test]
    fn variant_names_parse() {
        for v in Variant::ALL {
            assert_eq!(v.name().parse::<Variant>().unwrap(), v);
        }
        assert!("jpeg".parse::<Variant>().is_err());
    }
}
