use motimem::bitcodec::{self, CodingParams};
use motimem::pipeline::corpus::{self, CorpusConfig};
use motimem::pipeline::report::sweep_csv;
use motimem::pipeline::{compare_variants, run_sweep, run_variant, PipelineConfig, Variant};
use motimem::roi::ColdStart;

fn small_corpus() -> corpus::Corpus {
    corpus::generate(&CorpusConfig {
        frames: 12,
        width: 64,
        height: 64,
        ..CorpusConfig::default()
    })
}

#[test]
fn psnr_rises_with_k_without_roi() {
    let c = small_corpus();
    let sweep = run_sweep(
        &c.frames,
        &c.detections,
        &PipelineConfig::default(),
        Variant::GlobalK,
        1,
        7,
    )
    .unwrap();
    let psnr: Vec<f64> = sweep
        .points
        .iter()
        .map(|p| p.aggregates.mean_psnr_db)
        .collect();
    assert!(psnr.windows(2).all(|w| w[1] >= w[0]), "{psnr:?}");

    // Brute-force MSE of the background path at each k.
    for point in &sweep.points {
        let p = point.params;
        let mut total = 0.0;
        for f in &c.frames {
            let se: f64 = f
                .pixels()
                .iter()
                .map(|&x| {
                    let d = x as f64 - bitcodec::decode_bg(bitcodec::encode_bg(x, &p), &p) as f64;
                    d * d
                })
                .sum();
            total += se / f.pixels().len() as f64;
        }
        let expected = total / c.frames.len() as f64;
        assert!((point.aggregates.mean_mse - expected).abs() < 1e-9);
    }
}

#[test]
fn sweep_nbd_trend_and_shape() {
    let c = corpus::generate(&CorpusConfig::default());
    let sweep = run_sweep(
        &c.frames,
        &c.detections,
        &PipelineConfig::default(),
        Variant::MotiMem,
        1,
        7,
    )
    .unwrap();
    let nbd: Vec<f64> = sweep
        .points
        .iter()
        .map(|p| p.aggregates.mean_nbd.unwrap())
        .collect();
    assert!(nbd.windows(2).all(|w| w[1] >= w[0]), "{nbd:?}");
    assert_eq!(sweep_csv(&sweep).lines().count(), 8);
}

#[test]
fn single_point_sweep_equals_run() {
    let c = small_corpus();
    let cfg = PipelineConfig::default();
    let sweep = run_sweep(&c.frames, &c.detections, &cfg, Variant::MotiMem, 4, 4).unwrap();
    let run = run_variant(&c.frames, &c.detections, &cfg, Variant::MotiMem).unwrap();
    assert_eq!(sweep.points, vec![run]);
}

#[test]
fn baseline_definitions() {
    let c = small_corpus();
    let cfg = PipelineConfig::default();
    let cmp = compare_variants(&c.frames, &c.detections, &cfg).unwrap();
    assert_eq!(cmp.runs.len(), 4);

    let raw = cmp.run(Variant::Raw).unwrap();
    assert!(raw
        .rows
        .iter()
        .all(|r| r.nbd == Some(1.0) && r.psnr_db.is_infinite()));

    let p = CodingParams::new(8, 4, 16).unwrap();
    let uniform = cmp.run(Variant::UniformK).unwrap();
    for (row, f) in uniform.rows.iter().zip(&c.frames) {
        let ones: u64 = f
            .pixels()
            .iter()
            .map(|&x| bitcodec::top_k_weight(bitcodec::truncate_k(x, &p), &p) as u64)
            .sum();
        assert_eq!(row.enc_ones, ones);
    }

    let global = cmp.run(Variant::GlobalK).unwrap();
    assert!(global.rows.iter().all(|r| r.enc_bit1_density <= 0.375));
}

#[test]
fn cold_start_policies() {
    let c = small_corpus();
    let mut cfg = PipelineConfig::default();
    let run = run_variant(&c.frames, &c.detections, &cfg, Variant::MotiMem).unwrap();
    assert!(run.masks[0].is_all(true));
    assert!(run.rows[0].mse <= 1.0);

    cfg.roi.cold_start = ColdStart::AllBackground;
    let run = run_variant(&c.frames, &c.detections, &cfg, Variant::MotiMem).unwrap();
    assert!(run.masks[0].is_all(false));
}

#[test]
fn missing_trailing_detections_are_empty() {
    let c = small_corpus();
    let cfg = PipelineConfig::default();
    let full = run_variant(&c.frames, &c.detections, &cfg, Variant::MotiMem).unwrap();
    let short = run_variant(&c.frames, &c.detections[..6], &cfg, Variant::MotiMem).unwrap();
    assert_eq!(full.masks[..7], short.masks[..7]);
    assert!(run_variant(&c.frames[..3], &c.detections, &cfg, Variant::MotiMem).is_err());
}
