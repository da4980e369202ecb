//! Synthetic video corpus: textured objects moving over a textured
//! background, with ground-truth boxes.

use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::frame::Frame;
use crate::roi::{DetectionBox, FrameDetections};
use crate::stream::{self, StreamError};

pub const DETECTIONS_FILE: &str = "detections.jsonl";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorpusConfig {
    pub width: u32,
    pub height: u32,
    pub channels: u8,
    pub frames: usize,
    pub objects: usize,
    pub min_size: u32,
    pub max_size: u32,
    /// Largest per-axis speed in pixels per frame.
    pub max_speed: f64,
    pub seed: u64,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        Self {
            width: 128,
            height: 128,
            channels: 3,
            frames: 60,
            objects: 3,
            min_size: 14,
            max_size: 26,
            max_speed: 3.0,
            seed: 7,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    pub frames: Vec<Frame>,
    pub detections: Vec<FrameDetections>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Texture {
    Noisy,
    Gradient,
    Checker,
}

#[derive(Debug, Clone)]
struct Object {
    x: f64,
    y: f64,
    w: u32,
    h: u32,
    vx: f64,
    vy: f64,
    texture: Texture,
    color: [u8; 3],
}

impl Object {
    fn rect(&self) -> (u32, u32, u32, u32) {
        let x = self.x.round() as u32;
        let y = self.y.round() as u32;
        (x, y, x + self.w, y + self.h)
    }

    fn step(&mut self, width: u32, height: u32) {
        self.x += self.vx;
        self.y += self.vy;
        let max_x = (width - self.w) as f64;
        let max_y = (height - self.h) as f64;
        if self.x < 0.0 || self.x > max_x {
            self.vx = -self.vx;
            self.x = self.x.clamp(0.0, max_x);
        }
        if self.y < 0.0 || self.y > max_y {
            self.vy = -self.vy;
            self.y = self.y.clamp(0.0, max_y);
        }
    }

    fn sample(&self, px: u32, py: u32, c: usize, rng: &mut ChaCha8Rng) -> i32 {
        let base = self.color[c] as i32;
        let (x0, y0, _, _) = self.rect();
        let (dx, dy) = (px - x0, py - y0);
        match self.texture {
            Texture::Noisy => base + rng.random_range(-20..=20),
            Texture::Gradient => base - 60 + (120 * dx / self.w.max(1)) as i32,
            Texture::Checker => {
                if (dx / 4 + dy / 4) % 2 == 0 {
                    base
                } else {
                    255 - base / 2
                }
            }
        }
    }
}

/// Deterministic for a given config.
pub fn generate(cfg: &CorpusConfig) -> Corpus {
    assert!(
        cfg.channels == 1 || cfg.channels == 3,
        "channels must be 1 or 3"
    );
    assert!(
        cfg.min_size >= 1
            && cfg.min_size <= cfg.max_size
            && cfg.max_size < cfg.width.min(cfg.height),
        "object sizes must fit in the frame"
    );
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (w, h, ch) = (cfg.width, cfg.height, cfg.channels as usize);

    let texture: Vec<i32> = (0..w as usize * h as usize * ch)
        .map(|_| rng.random_range(0..48))
        .collect();

    let mut objects: Vec<Object> = (0..cfg.objects)
        .map(|i| {
            let ow = rng.random_range(cfg.min_size..=cfg.max_size);
            let oh = rng.random_range(cfg.min_size..=cfg.max_size);
            let speed = cfg.max_speed.max(0.0);
            Object {
                x: rng.random_range(0.0..=(w - ow) as f64),
                y: rng.random_range(0.0..=(h - oh) as f64),
                w: ow,
                h: oh,
                vx: if speed > 0.0 {
                    rng.random_range(-speed..=speed)
                } else {
                    0.0
                },
                vy: if speed > 0.0 {
                    rng.random_range(-speed..=speed)
                } else {
                    0.0
                },
                texture: [Texture::Noisy, Texture::Gradient, Texture::Checker][i % 3],
                color: [
                    rng.random_range(60..=255),
                    rng.random_range(60..=255),
                    rng.random_range(60..=255),
                ],
            }
        })
        .collect();

    let mut frames = Vec::with_capacity(cfg.frames);
    let mut detections = Vec::with_capacity(cfg.frames);
    for t in 0..cfg.frames {
        let mut px = Vec::with_capacity(w as usize * h as usize * ch);
        for y in 0..h {
            for x in 0..w {
                let owner = objects.iter().rev().find(|o| {
                    let (x0, y0, x1, y1) = o.rect();
                    x >= x0 && x < x1 && y >= y0 && y < y1
                });
                for c in 0..ch {
                    let v = match owner {
                        Some(o) => o.sample(x, y, c, &mut rng),
                        None => {
                            let ramp = (160 * (x + y) / (w + h)) as i32;
                            let tex = texture[(y as usize * w as usize + x as usize) * ch + c];
                            40 + ramp + tex + 12 * c as i32 + rng.random_range(-6..=6)
                        }
                    };
                    px.push(v.clamp(0, 255) as u16);
                }
            }
        }
        frames.push(Frame::new(w, h, cfg.channels, 8, px).expect("generator emits valid frames"));
        let boxes = objects
            .iter()
            .enumerate()
            .map(|(id, o)| {
                let (x0, y0, x1, y1) = o.rect();
                DetectionBox::new(
                    x0 as f64,
                    y0 as f64,
                    x1 as f64,
                    y1 as f64,
                    o.texture as u32,
                    1.0,
                )
                .expect("objects have positive size")
                .with_track(id as u64)
            })
            .collect();
        detections.push(FrameDetections::new(t as u64, boxes));
        for o in &mut objects {
            o.step(w, h);
        }
    }
    Corpus { frames, detections }
}

fn frame_file_name(index: usize, channels: u8) -> String {
    let ext = if channels == 1 { "pgm" } else { "ppm" };
    format!("frame_{index:05}.{ext}")
}

/// Writes `frame_NNNNN.ppm` (or `.pgm`) files and `detections.jsonl`.
pub fn write_corpus(dir: impl AsRef<Path>, corpus: &Corpus) -> Result<(), StreamError> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    for (i, f) in corpus.frames.iter().enumerate() {
        stream::write_frame(dir.join(frame_file_name(i, f.channels())), f)?;
    }
    stream::write_detections(dir.join(DETECTIONS_FILE), &corpus.detections)
}

/// PNM files in `dir`, sorted by name.
pub fn list_frames(dir: impl AsRef<Path>) -> Result<Vec<PathBuf>, StreamError> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            matches!(
                p.extension().and_then(|e| e.to_str()),
                Some("pgm" | "ppm" | "pnm")
            )
        })
        .collect();
    paths.sort();
    Ok(paths)
}

/// Loads frames from `dir` and detections from `detections` (default
/// `dir/detections.jsonl`; a missing default file means no detections).
pub fn read_corpus(
    dir: impl AsRef<Path>,
    detections: Option<&Path>,
) -> Result<Corpus, StreamError> {
    let dir = dir.as_ref();
    let frames = list_frames(dir)?
        .iter()
        .map(stream::read_frame)
        .collect::<Result<Vec<_>, _>>()?;
    let detections = match detections {
        Some(p) => stream::read_detections(p)?,
        None => {
            let p = dir.join(DETECTIONS_FILE);
            if p.exists() {
                stream::read_detections(p)?
            } else {
                Vec::new()
            }
        }
    };
    Ok(Corpus { frames, detections })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> CorpusConfig {
        CorpusConfig {
            width: 48,
            height: 40,
            frames: 5,
            objects: 2,
            min_size: 6,
            max_size: 10,
            ..CorpusConfig::default()
        }
    }

    #[test]
    fn deterministic_and_aligned() {
        let a = generate(&small());
        let b = generate(&small());
        assert_eq!(a, b);
        assert_eq!(a.frames.len(), 5);
        assert_eq!(a.detections.len(), 5);
        for (t, d) in a.detections.iter().enumerate() {
            assert_eq!(d.frame_index, t as u64);
            assert_eq!(d.boxes.len(), 2);
            for b in &d.boxes {
                assert!(b.x1 >= 0.0 && b.x2 <= 48.0 && b.y1 >= 0.0 && b.y2 <= 40.0);
            }
        }
        let other = generate(&CorpusConfig { seed: 8, ..small() });
        assert_ne!(a.frames, other.frames);
    }

    #[test]
    fn disk_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let c = generate(&CorpusConfig {
            channels: 1,
            ..small()
        });
        write_corpus(dir.path(), &c).unwrap();
        assert!(dir.path().join("frame_00000.pgm").exists());
        assert_eq!(read_corpus(dir.path(), None).unwrap(), c);
    }
}
