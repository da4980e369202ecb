use std::fs;
use std::path::{Path, PathBuf};

use motimem::bitcodec::{self, CodingParams};
use motimem::metrics::ActivityReport;
use motimem::pipeline::corpus::{self, Corpus, CorpusConfig};
use motimem::pipeline::report::{self, RunMeta};
use motimem::pipeline::{self, DetectorConfig, PipelineConfig, RunSummary};
use motimem::roi::{self, MotionTracker, RoiConfig, RoiMask};
use motimem::stream::{self, container, pnm};
use motimem::{decode_frame, encode_frame, EncodedFrame, Frame};

use crate::args::{
    CodingArgs, CompareArgs, DecodeArgs, EncodeArgs, GenCorpusArgs, LoopArgs, MetricsArgs, RunArgs,
    SweepArgs,
};
use crate::error::CliError;

type Result<T> = std::result::Result<T, CliError>;

fn coding_params(bit_width: u8, k: u8, tau: Option<u8>, block: u16) -> Result<CodingParams> {
    match tau {
        Some(tau) => CodingParams::with_tau(bit_width, k, tau, block),
        None => CodingParams::new(bit_width, k, block),
    }
    .map_err(|e| CliError::Usage(format!("{e} (frames are {bit_width}-bit)")))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    report::write_text(path, text).map_err(CliError::output(path))
}

fn with_extension(path: &Path, ext: &str) -> PathBuf {
    let mut name = path.as_os_str().to_owned();
    name.push(".");
    name.push(ext);
    PathBuf::from(name)
}

/// Mask for the frame after the last entry of `dets`, with velocities from
/// the two most recent entries.
fn mask_from_detections(
    path: &Path,
    frame: &Frame,
    params: &CodingParams,
    roi_cfg: &RoiConfig,
    frame_index: Option<u64>,
) -> Result<RoiMask> {
    let dims = frame.dims();
    let block = params.block_size();
    let dets = stream::read_detections(path).map_err(CliError::input(path))?;
    let Some(last) = dets.last() else {
        log::warn!(
            "{}: no detections; coding the whole frame as RoI",
            path.display()
        );
        return Ok(roi::cold_start_mask(dims, block, roi_cfg.cold_start));
    };
    let target = frame_index.unwrap_or(last.frame_index + 1);
    if target <= last.frame_index {
        return Err(CliError::Usage(format!(
            "--frame-index {target} must come after the last detection frame {}",
            last.frame_index
        )));
    }
    let mut tracker = MotionTracker::new(roi_cfg.iou_threshold);
    let start = dets.len().saturating_sub(2);
    let mut motion = Vec::new();
    for d in &dets[start..] {
        motion = tracker.observe(d);
    }
    if last
        .boxes
        .iter()
        .all(|b| b.confidence < roi_cfg.confidence_floor)
    {
        log::warn!(
            "{}: no usable boxes in frame {}; using the cold-start mask",
            path.display(),
            last.frame_index
        );
    }
    Ok(roi::predict_mask(
        last, &motion, target, dims, block, roi_cfg,
    ))
}

/// Checks the per-region reconstruction contract of a freshly coded frame.
fn verify_roundtrip(frame: &Frame, enc: &EncodedFrame, decoded: &Frame) -> Result<()> {
    let p = enc.params();
    let (w, h, ch) = (frame.width(), frame.height(), frame.channels() as usize);
    let block = p.block_size() as u32;
    let bg_bound = ((1u16 << (p.bit_width() - p.retained_k())) - 1).max(1);
    for y in 0..h {
        for x in 0..w {
            let roi = enc.mask().get(x / block, y / block);
            let i = (y * w + x) as usize * ch;
            for c in 0..ch {
                let (orig, got) = (frame.pixels()[i + c], decoded.pixels()[i + c]);
                let ok = if roi {
                    orig.abs_diff(got) <= 1
                } else {
                    bitcodec::truncate_k(got, p) == bitcodec::truncate_k(orig, p)
                        && orig.abs_diff(got) <= bg_bound
                };
                if !ok {
                    return Err(CliError::Internal(format!(
                        "pixel ({x},{y}) channel {c}: {orig} decoded as {got}"
                    )));
                }
            }
        }
    }
    Ok(())
}

pub fn encode(args: &EncodeArgs) -> Result<()> {
    let frame = stream::read_frame(&args.frame).map_err(CliError::input(&args.frame))?;
    let CodingArgs { k, tau, block } = args.coding;
    let params = coding_params(frame.bit_width(), k, tau, block)?;
    let roi_cfg = args.roi.config();
    let mask = match &args.detections {
        Some(path) => mask_from_detections(path, &frame, &params, &roi_cfg, args.frame_index)?,
        None => {
            log::warn!("no detections given; coding the whole frame as RoI");
            roi::cold_start_mask(frame.dims(), block, roi_cfg.cold_start)
        }
    };
    let enc =
        encode_frame(&frame, &mask, &params).map_err(|e| CliError::Internal(e.to_string()))?;
    let decoded = decode_frame(&enc);
    verify_roundtrip(&frame, &enc, &decoded)?;

    let out = args
        .out
        .clone()
        .unwrap_or_else(|| with_extension(&args.frame, "mtmm"));
    container::write_encoded(&out, &enc).map_err(CliError::output(&out))?;
    let coverage = mask.pixel_coverage(frame.dims());
    let r = ActivityReport::measure(0, &frame, &enc.as_frame(), &decoded, 8, Some(coverage))?;
    println!(
        "{}: k={} tau={} block={} nbd={} mask_coverage={} psnr_db={}",
        out.display(),
        params.retained_k(),
        params.tau(),
        params.block_size(),
        report::fmt_nbd(r.nbd),
        report::fmt_real(coverage),
        report::fmt_real(r.psnr_db),
    );
    Ok(())
}

pub fn decode(args: &DecodeArgs) -> Result<()> {
    let enc = container::read_encoded(&args.container).map_err(CliError::input(&args.container))?;
    let frame = decode_frame(&enc);
    let ext = if frame.channels() == 1 { "pgm" } else { "ppm" };
    let out = args
        .out
        .clone()
        .unwrap_or_else(|| args.container.with_extension(ext));
    stream::write_frame(&out, &frame).map_err(CliError::output(&out))?;
    println!(
        "{}: {}x{}x{} {}-bit",
        out.display(),
        frame.width(),
        frame.height(),
        frame.channels(),
        frame.bit_width()
    );
    Ok(())
}

pub fn metrics(args: &MetricsArgs) -> Result<()> {
    let raw = stream::read_frame(&args.raw).map_err(CliError::input(&args.raw))?;
    let bytes = fs::read(&args.other).map_err(|e| CliError::input(&args.other)(e.into()))?;
    let (encoded, decoded, params, coverage) = if bytes.starts_with(&container::MAGIC) {
        let enc = container::decode_container(&bytes).map_err(CliError::input(&args.other))?;
        let coverage = enc.mask().pixel_coverage(enc.as_frame().dims());
        (
            enc.as_frame(),
            decode_frame(&enc),
            Some(*enc.params()),
            Some(coverage),
        )
    } else {
        let f = pnm::parse_pnm(&bytes).map_err(CliError::input(&args.other))?;
        (f.clone(), f, None, None)
    };
    let r = ActivityReport::measure(0, &raw, &encoded, &decoded, args.word_width, coverage)?;
    if args.header {
        println!("{}", report::csv_line(&report::FRAME_HEADER));
    }
    println!(
        "{}",
        report::csv_line(&report::frame_record(&r, None, params.as_ref()))
    );
    Ok(())
}

struct Loaded {
    corpus: Corpus,
    cfg: PipelineConfig,
}

fn load(common: &LoopArgs, k: u8, tau: Option<u8>, block: u16) -> Result<Loaded> {
    let paths = corpus::list_frames(&common.frames).map_err(CliError::input(&common.frames))?;
    if paths.is_empty() {
        return Err(CliError::NoFrames(common.frames.clone()));
    }
    let frames = paths
        .iter()
        .map(|p| stream::read_frame(p).map_err(CliError::input(p)))
        .collect::<Result<Vec<_>>>()?;
    let default_dets = common.frames.join(corpus::DETECTIONS_FILE);
    let detections = match &common.detections {
        Some(p) => stream::read_detections(p).map_err(CliError::input(p))?,
        None if default_dets.exists() => {
            stream::read_detections(&default_dets).map_err(CliError::input(&default_dets))?
        }
        None => Vec::new(),
    };
    let corpus = Corpus { frames, detections };
    if !(0.0..=1.0).contains(&common.dropout)
        || common.noise_sigma.is_nan()
        || common.noise_sigma < 0.0
    {
        return Err(CliError::Usage(
            "--dropout must lie in [0, 1] and --noise-sigma must be non-negative".into(),
        ));
    }
    if corpus.detections.is_empty() {
        log::warn!("no detections found; every frame uses the cold-start mask");
    }
    let cfg = PipelineConfig {
        retained_k: k,
        tau,
        block_size: block,
        roi: common.roi.config(),
        detector: DetectorConfig {
            noise_sigma: common.noise_sigma,
            dropout: common.dropout,
        },
        seed: common.seed,
        word_width: common.word_width,
    };
    Ok(Loaded { corpus, cfg })
}

fn create_out_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::output(dir)(e.into()))
}

fn write_meta(dir: &Path, command: &str, loaded: &Loaded) -> Result<()> {
    let meta = RunMeta {
        command,
        frames: loaded.corpus.frames.len(),
        seed: loaded.cfg.seed,
        config: &loaded.cfg,
    };
    write_text(&dir.join("run_meta.json"), &report::meta_json(&meta))
}

fn summary_line(run: &RunSummary) -> String {
    let a = &run.aggregates;
    format!(
        "{:<10} k={} tau={}  nbd={}  enc_density={}  psnr_db={}  mask_coverage={}",
        run.variant.name(),
        run.params.retained_k(),
        run.params.tau(),
        report::fmt_nbd(a.mean_nbd),
        report::fmt_real(a.mean_enc_density),
        report::fmt_real(a.mean_psnr_db),
        report::fmt_real(a.mean_mask_coverage),
    )
}

pub fn run(args: &RunArgs) -> Result<()> {
    let CodingArgs { k, tau, block } = args.coding;
    let loaded = load(&args.common, k, tau, block)?;
    let bit_width = loaded.corpus.frames[0].bit_width();
    coding_params(bit_width, k, tau, block)?;
    let run = pipeline::run_variant(
        &loaded.corpus.frames,
        &loaded.corpus.detections,
        &loaded.cfg,
        args.variant,
    )?;

    let out = &args.common.out;
    create_out_dir(out)?;
    let csv = report::frames_csv(&[&run]);
    write_text(&out.join("report.csv"), &csv)?;
    write_meta(out, "run", &loaded)?;
    if args.common.csv {
        print!("{csv}");
    } else {
        println!("{} frames", run.rows.len());
        println!("{}", summary_line(&run));
    }
    Ok(())
}

pub fn sweep(args: &SweepArgs) -> Result<()> {
    let (k_start, k_end) = args.k;
    let loaded = load(&args.common, k_start, args.tau, args.block)?;
    let bit_width = loaded.corpus.frames[0].bit_width();
    for k in k_start..=k_end {
        coding_params(bit_width, k, args.tau, args.block)?;
    }
    let sweep = pipeline::run_sweep(
        &loaded.corpus.frames,
        &loaded.corpus.detections,
        &loaded.cfg,
        args.variant,
        k_start,
        k_end,
    )?;

    let out = &args.common.out;
    create_out_dir(out)?;
    let csv = report::sweep_csv(&sweep);
    write_text(&out.join("sweep.csv"), &csv)?;
    let runs: Vec<&RunSummary> = sweep.points.iter().collect();
    write_text(&out.join("sweep_frames.csv"), &report::frames_csv(&runs))?;
    write_meta(out, "sweep", &loaded)?;
    if args.common.csv {
        print!("{csv}");
    } else {
        for run in &sweep.points {
            println!("{}", summary_line(run));
        }
    }
    Ok(())
}

pub fn compare(args: &CompareArgs) -> Result<()> {
    let CodingArgs { k, tau, block } = args.coding;
    let loaded = load(&args.common, k, tau, block)?;
    let bit_width = loaded.corpus.frames[0].bit_width();
    coding_params(bit_width, k, tau, block)?;
    let cmp = pipeline::compare_variants(
        &loaded.corpus.frames,
        &loaded.corpus.detections,
        &loaded.cfg,
    )?;

    let out = &args.common.out;
    create_out_dir(out)?;
    let csv = report::compare_csv(&cmp);
    write_text(&out.join("compare.csv"), &csv)?;
    let runs: Vec<&RunSummary> = cmp.runs.iter().collect();
    write_text(&out.join("compare_frames.csv"), &report::frames_csv(&runs))?;
    write_meta(out, "compare", &loaded)?;
    if args.common.csv {
        print!("{csv}");
    } else {
        for run in &cmp.runs {
            println!("{}", summary_line(run));
        }
        println!(
            "mixed-mask frames with global_k < motimem < 1: {}/{}",
            cmp.ordering.between, cmp.ordering.mixed_frames
        );
    }
    Ok(())
}

pub fn gen_corpus(args: &GenCorpusArgs) -> Result<()> {
    if args.channels == 2 {
        return Err(CliError::Usage("--channels must be 1 or 3".into()));
    }
    if args.min_size == 0
        || args.min_size > args.max_size
        || args.max_size >= args.width.min(args.height)
    {
        return Err(CliError::Usage(format!(
            "object sizes {}..{} must satisfy 1 <= min <= max < min(width, height)",
            args.min_size, args.max_size
        )));
    }
    if !args.max_speed.is_finite() || args.max_speed < 0.0 {
        return Err(CliError::Usage(
            "--max-speed must be finite and non-negative".into(),
        ));
    }
    let cfg = CorpusConfig {
        width: args.width,
        height: args.height,
        channels: args.channels,
        frames: args.frames,
        objects: args.objects,
        min_size: args.min_size,
        max_size: args.max_size,
        max_speed: args.max_speed,
        seed: args.seed,
    };
    let c = corpus::generate(&cfg);
    corpus::write_corpus(&args.out, &c).map_err(CliError::output(&args.out))?;
    println!(
        "{}: {} frames, {}x{}x{}",
        args.out.display(),
        c.frames.len(),
        cfg.width,
        cfg.height,
        cfg.channels
    );
    Ok(())
}
