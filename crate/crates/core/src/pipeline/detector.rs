//! Stand-in for a real detector: perturbs ground-truth boxes.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::Serialize;

use crate::frame::FrameDims;
use crate::roi::{DetectionBox, FrameDetections};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DetectorConfig {
    /// Standard deviation of the per-coordinate jitter, in pixels.
    pub noise_sigma: f64,
    /// Probability that a ground-truth box is missed.
    pub dropout: f64,
}

impl DetectorConfig {
    pub const PERFECT: DetectorConfig = DetectorConfig {
        noise_sigma: 0.0,
        dropout: 0.0,
    };
}

impl Default for DetectorConfig {
    // Arbitrary: nothing ties these to a particular real detector.
    fn default() -> Self {
        Self {
            noise_sigma: 2.0,
            dropout: 0.05,
        }
    }
}

/// Generator for one frame. Each frame draws from its own ChaCha stream so
/// the output for frame `t` depends only on the seed, `t` and the boxes.
pub fn frame_rng(seed: u64, frame_index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(frame_index);
    rng
}

/// Drops each box with probability `dropout`, then jitters the survivors by
/// integer offsets drawn from `N(0, noise_sigma)` and clamps them to the
/// frame. Boxes that collapse after clamping are dropped too.
pub fn oracle_detector(
    ground_truth: &FrameDetections,
    dims: FrameDims,
    cfg: &DetectorConfig,
    seed: u64,
) -> FrameDetections {
    let mut rng = frame_rng(seed, ground_truth.frame_index);
    let dropout = cfg.dropout.clamp(0.0, 1.0);
    let jitter = (cfg.noise_sigma > 0.0)
        .then(|| Normal::new(0.0, cfg.noise_sigma).expect("finite positive sigma"));
    let mut boxes = Vec::with_capacity(ground_truth.boxes.len());
    for b in &ground_truth.boxes {
        if rng.random_bool(dropout) {
            continue;
        }
        let Some(normal) = &jitter else {
            boxes.push(*b);
            continue;
        };
        let mut offs = [0.0f64; 4];
        for o in &mut offs {
            *o = normal.sample(&mut rng).round();
        }
        let (xa, xb) = (b.x1 + offs[0], b.x2 + offs[2]);
        let (ya, yb) = (b.y1 + offs[1], b.y2 + offs[3]);
        let moved = DetectionBox {
            x1: xa.min(xb),
            y1: ya.min(yb),
            x2: xa.max(xb),
            y2: ya.max(yb),
            ..*b
        }
        .clamp_to(dims);
        if moved.x2 > moved.x1 && moved.y2 > moved.y1 {
            boxes.push(moved);
        }
    }
    FrameDetections::new(ground_truth.frame_index, boxes)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gt() -> FrameDetections {
        FrameDetections::new(
            4,
            vec![
                DetectionBox::new(10., 10., 30., 40., 1, 0.9).unwrap(),
                DetectionBox::new(50., 5., 60., 20., 2, 0.8)
                    .unwrap()
                    .with_track(3),
            ],
        )
    }

    const DIMS: FrameDims = FrameDims {
        width: 64,
        height: 64,
    };

    #[test]
    fn perfect_detector_is_identity() {
        assert_eq!(
            oracle_detector(&gt(), DIMS, &DetectorConfig::PERFECT, 1),
            gt()
        );
    }

    #[test]
    fn full_dropout_is_empty() {
        let cfg = DetectorConfig {
            noise_sigma: 3.0,
            dropout: 1.0,
        };
        let out = oracle_detector(&gt(), DIMS, &cfg, 1);
        assert!(out.boxes.is_empty());
        assert_eq!(out.frame_index, 4);
    }

    #[test]
    fn seeded_runs_repeat() {
        let cfg = DetectorConfig {
            noise_sigma: 4.0,
            dropout: 0.3,
        };
        let a = oracle_detector(&gt(), DIMS, &cfg, 77);
        let b = oracle_detector(&gt(), DIMS, &cfg, 77);
        assert_eq!(a, b);
        for bx in &a.boxes {
            assert_eq!(bx.x1.fract(), 0.0);
            assert!(bx.x1 >= 0.0 && bx.x2 <= 64.0 && bx.x1 < bx.x2);
        }
    }

    #[test]
    fn jitter_changes_something_across_seeds() {
        let cfg = DetectorConfig {
            noise_sigma: 5.0,
            dropout: 0.0,
        };
        let outs: Vec<_> = (0..8)
            .map(|s| oracle_detector(&gt(), DIMS, &cfg, s))
            .collect();
        assert!(outs.iter().any(|o| *o != gt()));
    }
}
