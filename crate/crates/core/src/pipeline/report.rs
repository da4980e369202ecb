//! CSV reports.
//!
//! Per-frame schema:
//! `frame,variant,k,tau,W,raw_density,enc_density,nbd,alpha_raw,alpha_enc,mse,psnr_db,mask_coverage`
//!
//! Sweep schema: `k,mean_nbd,mean_psnr_db,mean_mask_coverage`
//!
//! Comparison schema: one row of means per variant, see [`COMPARE_HEADER`].
//!
//! Reals are printed with six decimals. An undefined NBD prints as `undef`,
//! an exact reconstruction as `inf` dB, an unknown coverage as `na`.

use std::fs;
use std::path::Path;

use serde::Serialize;

use super::{Comparison, PipelineConfig, RunSummary, SweepSummary};
use crate::bitcodec::CodingParams;
use crate::metrics::ActivityReport;
use crate::stream::StreamError;

pub const FRAME_HEADER: [&str; 13] = [
    "frame",
    "variant",
    "k",
    "tau",
    "W",
    "raw_density",
    "enc_density",
    "nbd",
    "alpha_raw",
    "alpha_enc",
    "mse",
    "psnr_db",
    "mask_coverage",
];

pub const SWEEP_HEADER: [&str; 4] = ["k", "mean_nbd", "mean_psnr_db", "mean_mask_coverage"];

pub const COMPARE_HEADER: [&str; 10] = [
    "variant",
    "k",
    "tau",
    "mean_raw_density",
    "mean_enc_density",
    "mean_nbd",
    "mean_alpha_raw",
    "mean_alpha_enc",
    "mean_psnr_db",
    "mean_mask_coverage",
];

pub fn fmt_real(v: f64) -> String {
    if v.is_infinite() {
        if v > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        }
    } else {
        format!("{v:.6}")
    }
}

pub fn fmt_nbd(v: Option<f64>) -> String {
    v.map_or_else(|| "undef".into(), fmt_real)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "na".into(), fmt_real)
}

/// One per-frame CSV record. `variant` and `params` are `None` for
/// stand-alone measurements (printed as `na`).
pub fn frame_record(
    r: &ActivityReport,
    variant: Option<&str>,
    params: Option<&CodingParams>,
) -> Vec<String> {
    vec![
        r.frame_index.to_string(),
        variant.unwrap_or("na").to_string(),
        params.map_or("na".into(), |p| p.retained_k().to_string()),
        params.map_or("na".into(), |p| p.tau().to_string()),
        r.word_width.to_string(),
        fmt_real(r.raw_bit1_density),
        fmt_real(r.enc_bit1_density),
        fmt_nbd(r.nbd),
        fmt_real(r.alpha_raw),
        fmt_real(r.alpha_enc),
        fmt_real(r.mse),
        fmt_real(r.psnr_db),
        fmt_opt(r.mask_coverage),
    ]
}

fn to_csv<'a>(header: &[&str], records: impl Iterator<Item = Vec<String>> + 'a) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for rec in records {
        w.write_record(&rec).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("ascii output")
}

/// Per-frame rows of one or more runs, runs in order.
pub fn frames_csv(runs: &[&RunSummary]) -> String {
    to_csv(
        &FRAME_HEADER,
        runs.iter().flat_map(|run| {
            run.rows
                .iter()
                .map(move |r| frame_record(r, Some(run.variant.name()), Some(&run.params)))
        }),
    )
}

pub fn sweep_csv(sweep: &SweepSummary) -> String {
    to_csv(
        &SWEEP_HEADER,
        sweep.points.iter().map(|p| {
            vec![
                p.params.retained_k().to_string(),
                fmt_nbd(p.aggregates.mean_nbd),
                fmt_real(p.aggregates.mean_psnr_db),
                fmt_real(p.aggregates.mean_mask_coverage),
            ]
        }),
    )
}

pub fn compare_csv(cmp: &Comparison) -> String {
    to_csv(
        &COMPARE_HEADER,
        cmp.runs.iter().map(|run| {
            let a = &run.aggregates;
            vec![
                run.variant.name().to_string(),
                run.params.retained_k().to_string(),
                run.params.tau().to_string(),
                fmt_real(a.mean_raw_density),
                fmt_real(a.mean_enc_density),
                fmt_nbd(a.mean_nbd),
                fmt_real(a.mean_alpha_raw),
                fmt_real(a.mean_alpha_enc),
                fmt_real(a.mean_psnr_db),
                fmt_real(a.mean_mask_coverage),
            ]
        }),
    )
}

/// Comma-joined record without quoting; fields never contain separators.
pub fn csv_line(fields: &[impl AsRef<str>]) -> String {
    fields
        .iter()
        .map(AsRef::as_ref)
        .collect::<Vec<_>>()
        .join(",")
}

/// Run metadata written next to the CSVs: the configuration and the seed
/// every random draw derives from.
#[derive(Debug, Serialize)]
pub struct RunMeta<'a> {
    pub command: &'a str,
    pub frames: usize,
    pub seed: u64,
    pub config: &'a PipelineConfig,
}

pub fn meta_json(meta: &RunMeta<'_>) -> String {
    let mut s = serde_json::to_string_pretty(meta).expect("metadata serializes");
    s.push('\n');
    s
}

pub fn write_text(path: impl AsRef<Path>, text: &str) -> Result<(), StreamError> {
    fs::write(path, text)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pipeline::{run_sweep, DetectorConfig, Variant};
    use crate::Frame;

    #[test]
    fn special_values() {
        assert_eq!(fmt_real(f64::INFINITY), "inf");
        assert_eq!(fmt_real(0.1875), "0.187500");
        assert_eq!(fmt_nbd(None), "undef");
        assert_eq!(fmt_opt(None), "na");
    }

    #[test]
    fn csv_layouts() {
        let frames: Vec<Frame> = (0..2)
            .map(|i| Frame::new(16, 16, 1, 8, (0..256).map(|v| (v + i) % 256).collect()).unwrap())
            .collect();
        let cfg = PipelineConfig {
            detector: DetectorConfig::PERFECT,
            ..PipelineConfig::default()
        };
        let sweep = run_sweep(&frames, &[], &cfg, Variant::GlobalK, 3, 5).unwrap();
        let s = sweep_csv(&sweep);
        let lines: Vec<_> = s.lines().collect();
        assert_eq!(lines[0], "k,mean_nbd,mean_psnr_db,mean_mask_coverage");
        assert_eq!(lines.len(), 4);
        assert!(lines[1].starts_with("3,"));

        let runs: Vec<&RunSummary> = sweep.points.iter().collect();
        let f = frames_csv(&runs[..1]);
        let lines: Vec<_> = f.lines().collect();
        assert_eq!(lines[0], FRAME_HEADER.join(","));
        assert_eq!(lines.len(), 3);
        let cols: Vec<_> = lines[1].split(',').collect();
        assert_eq!(&cols[..5], &["0", "global_k", "3", "1", "8"]);
        assert_eq!(cols[12], "0.000000");
    }

    #[test]
    fn compare_layout() {
        let frames = vec![Frame::new(8, 8, 1, 8, (0..64).map(|v| v * 4).collect()).unwrap()];
        let cmp =
            crate::pipeline::compare_variants(&frames, &[], &PipelineConfig::default()).unwrap();
        let s = compare_csv(&cmp);
        let lines: Vec<_> = s.lines().collect();
        assert_eq!(lines[0], COMPARE_HEADER.join(","));
        assert_eq!(lines.len(), 5);
        assert!(lines
            .iter()
            .any(|l| l.starts_with("raw,4,2,") && l.contains(",1.000000,")));
        assert_eq!(csv_line(&["a", "b"]), "a,b");
    }
}
