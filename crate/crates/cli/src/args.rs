use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use motimem::pipeline::Variant;
use motimem::roi::{ColdStart, InflationPolicy, RoiConfig};

#[derive(Debug, Parser)]
#[command(
    name = "motimem",
    version,
    about = "RoI-guided hybrid frame coder and memory-traffic metrics"
)]
#[command(after_help = "Log verbosity is read from RUST_LOG (default: warn).")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Encode one PNM frame into a container, using a mask predicted from prior detections
    Encode(EncodeArgs),
    /// Decode a container back to a PNM frame
    Decode(DecodeArgs),
    /// Print one CSV row of bit activity metrics for a raw frame and its coded form
    Metrics(MetricsArgs),
    /// Closed-loop run of one variant over a frame directory
    Run(RunArgs),
    /// Run one variant for every k in a range
    Sweep(SweepArgs),
    /// Run MotiMem, Global-k, Uniform-k and Raw on identical inputs
    Compare(CompareArgs),
    /// Write the synthetic corpus (frames plus ground-truth detections)
    GenCorpus(GenCorpusArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ColdStartArg {
    AllRoi,
    AllBackground,
}

#[derive(Debug, Args)]
pub struct CodingArgs {
    /// Retained most-significant bits per word (1..B-1)
    #[arg(long, default_value_t = 4)]
    pub k: u8,
    /// Inversion threshold on the top-k weight [default: floor(k/2)]
    #[arg(long)]
    pub tau: Option<u8>,
    /// RoI mask block size in pixels
    #[arg(long, default_value_t = 16, value_parser = clap::value_parser!(u16).range(1..))]
    pub block: u16,
}

#[derive(Debug, Args)]
pub struct RoiArgs {
    /// Minimum margin added to each box side, in pixels
    #[arg(long, default_value_t = 8.0)]
    pub inflate_abs: f64,
    /// Margin as a fraction of the box side, when larger than the floor
    #[arg(long, default_value_t = 0.1)]
    pub inflate_rel: f64,
    /// IoU threshold for matching boxes across frames
    #[arg(long, default_value_t = 0.3)]
    pub iou: f64,
    /// Boxes below this confidence do not contribute to the mask
    #[arg(long, default_value_t = 0.0)]
    pub confidence_floor: f64,
    /// Mask used when no prior detections are available
    #[arg(long, value_enum, default_value_t = ColdStartArg::AllRoi)]
    pub cold_start: ColdStartArg,
}

impl RoiArgs {
    pub fn config(&self) -> RoiConfig {
        RoiConfig {
            inflation: InflationPolicy {
                abs_floor: self.inflate_abs,
                rel_fraction: self.inflate_rel,
            },
            iou_threshold: self.iou,
            confidence_floor: self.confidence_floor,
            cold_start: match self.cold_start {
                ColdStartArg::AllRoi => ColdStart::AllRoi,
                ColdStartArg::AllBackground => ColdStart::AllBackground,
            },
        }
    }
}

#[derive(Debug, Args)]
pub struct JobsArg {
    /// Worker threads; 0 uses every core
    #[arg(long, default_value_t = 0)]
    pub jobs: usize,
}

#[derive(Debug, Args)]
pub struct EncodeArgs {
    /// Input PGM/PPM frame
    pub frame: PathBuf,
    /// JSONL detections of earlier frames [default: none, whole frame coded as RoI]
    #[arg(long)]
    pub detections: Option<PathBuf>,
    /// Index of the frame being encoded [default: last detection frame + 1]
    #[arg(long)]
    pub frame_index: Option<u64>,
    /// Output container [default: <FRAME>.mtmm]
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub coding: CodingArgs,
    #[command(flatten)]
    pub roi: RoiArgs,
    #[command(flatten)]
    pub jobs: JobsArg,
}

#[derive(Debug, Args)]
pub struct DecodeArgs {
    /// Input container
    pub container: PathBuf,
    /// Output frame [default: <CONTAINER> with .pgm or .ppm extension]
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub jobs: JobsArg,
}

#[derive(Debug, Args)]
pub struct MetricsArgs {
    /// Raw PGM/PPM frame
    pub raw: PathBuf,
    /// Coded frame: a container or a decoded PGM/PPM frame
    pub other: PathBuf,
    /// Word width W for transition activity
    #[arg(long, default_value_t = 8, value_parser = clap::value_parser!(u32).range(1..=64))]
    pub word_width: u32,
    /// Print the CSV header line first [default: off]
    #[arg(long)]
    pub header: bool,
}

#[derive(Debug, Args)]
pub struct LoopArgs {
    /// Directory of PGM/PPM frames, processed in file-name order
    pub frames: PathBuf,
    /// Ground-truth JSONL detections [default: <FRAMES>/detections.jsonl if present]
    #[arg(long)]
    pub detections: Option<PathBuf>,
    /// Output directory
    #[arg(long, default_value = "motimem-out")]
    pub out: PathBuf,
    /// Seed for the detector stub
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// Standard deviation of detector box jitter, in pixels
    #[arg(long, default_value_t = 2.0)]
    pub noise_sigma: f64,
    /// Probability that the detector misses a box
    #[arg(long, default_value_t = 0.05)]
    pub dropout: f64,
    /// Word width W for transition activity
    #[arg(long, default_value_t = 8, value_parser = clap::value_parser!(u32).range(1..=64))]
    pub word_width: u32,
    /// Print CSV to standard output instead of a summary [default: off]
    #[arg(long)]
    pub csv: bool,
    #[command(flatten)]
    pub roi: RoiArgs,
    #[command(flatten)]
    pub jobs: JobsArg,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub common: LoopArgs,
    #[command(flatten)]
    pub coding: CodingArgs,
    /// Coding variant
    #[arg(long, default_value = "motimem", value_parser = parse_variant)]
    pub variant: Variant,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub common: LoopArgs,
    /// Range of retained bits, START:END inclusive, or a single value
    #[arg(long, default_value = "1:7", value_parser = parse_k_range)]
    pub k: (u8, u8),
    /// Inversion threshold for every point [default: floor(k/2) per point]
    #[arg(long)]
    pub tau: Option<u8>,
    /// RoI mask block size in pixels
    #[arg(long, default_value_t = 16, value_parser = clap::value_parser!(u16).range(1..))]
    pub block: u16,
    /// Coding variant
    #[arg(long, default_value = "motimem", value_parser = parse_variant)]
    pub variant: Variant,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[command(flatten)]
    pub common: LoopArgs,
    #[command(flatten)]
    pub coding: CodingArgs,
}

#[derive(Debug, Args)]
pub struct GenCorpusArgs {
    /// Output directory
    #[arg(long, default_value = "corpus")]
    pub out: PathBuf,
    /// Number of frames
    #[arg(long, default_value_t = 60)]
    pub frames: usize,
    /// Frame width in pixels
    #[arg(long, default_value_t = 128)]
    pub width: u32,
    /// Frame height in pixels
    #[arg(long, default_value_t = 128)]
    pub height: u32,
    /// Channels, 1 (PGM) or 3 (PPM)
    #[arg(long, default_value_t = 3, value_parser = clap::value_parser!(u8).range(1..=3))]
    pub channels: u8,
    /// Number of moving objects
    #[arg(long, default_value_t = 3)]
    pub objects: usize,
    /// Smallest object side in pixels
    #[arg(long, default_value_t = 14)]
    pub min_size: u32,
    /// Largest object side in pixels
    #[arg(long, default_value_t = 26)]
    pub max_size: u32,
    /// Largest per-axis object speed in pixels per frame
    #[arg(long, default_value_t = 3.0)]
    pub max_speed: f64,
    /// Generator seed
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
}

fn parse_variant(s: &str) -> Result<Variant, String> {
    s.parse()
}

fn parse_k_range(s: &str) -> Result<(u8, u8), String> {
    let bad = || format!("expected START:END or a single k, got {s:?}");
    let (a, b) = s.split_once(':').unwrap_or((s, s));
    let a: u8 = a.trim().parse().map_err(|_| bad())?;
    let b: u8 = b.trim().parse().map_err(|_| bad())?;
    if a == 0 || a > b {
        return Err(bad());
    }
    Ok((a, b))
}
