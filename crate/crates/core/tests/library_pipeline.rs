use hqc_core::curation::{
    analyze_record, curate, read_manifest, write_jsonl, CurationPolicy, ManifestLabels, NoLabels, SubCategory,
};
use hqc_core::degrade::{make_pair, Degradation, DegradationSpec};
use hqc_core::jpeg::encode_jpeg;
use hqc_core::metrics::evaluate_pair;
use hqc_core::{load_image, RasterImage};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn noisy(width: usize, height: usize, seed: u64) -> RasterImage {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let samples = (0..width * height * 3)
        .map(|i| ((i % (width * 3)) as f64 * 0.4 + rng.random_range(0.0..60.0)) as u8)
        .collect();
    RasterImage::new(width, height, 3, samples).unwrap()
}

#[test]
fn analysed_files_report_their_encoded_size() {
    let dir = tempfile::tempdir().unwrap();
    let png = dir.path().join("a.png");
    noisy(80, 60, 1).save_png(&png).unwrap();
    let jpg = dir.path().join("b.jpg");
    std::fs::write(&jpg, encode_jpeg(&noisy(80, 60, 2), 85).unwrap()).unwrap();

    let labels = ManifestLabels::from_rows(vec![("a".to_string(), None, Some(SubCategory::Map))]).unwrap();
    let a = analyze_record(&png, "a", &labels, None);
    assert!(a.is_valid());
    assert_eq!(a.encoded_bytes, std::fs::metadata(&png).unwrap().len());
    assert_eq!(a.bpp, 8.0 * a.encoded_bytes as f64 / 4800.0);
    assert_eq!(a.sub_category, Some(SubCategory::Map));
    assert!(a.hf_ratio > 0.0 && a.hf_ratio < 1.0);
    a.check_consistency().unwrap();

    let b = analyze_record(&jpg, "b", &labels, None);
    assert!(b.is_valid());
    assert_eq!((b.width, b.height), (80, 60));
    assert_eq!(b.sub_category, None);

    let downscaled = analyze_record(&png, "a", &NoLabels, Some(32));
    assert_eq!(downscaled.analysis_max_side, Some(32));
    assert_ne!(downscaled.hf_ratio, a.hf_ratio);
}

#[test]
fn undecodable_file_becomes_an_invalid_record() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.png");
    std::fs::write(&path, [0x89, b'P', b'N', b'G', 0, 0]).unwrap();
    let r = analyze_record(&path, "bad", &NoLabels, None);
    assert!(!r.is_valid());
    let policy = CurationPolicy {
        min_side: 1,
        min_bytes: 1,
        min_hf_ratio: 1e-9,
        target_count: 5,
        ..CurationPolicy::default()
    };
    let out = curate(vec![r], &policy, 0).unwrap();
    assert!(out.selected.is_empty());
    assert_eq!(out.rejected.len(), 1);
}

#[test]
fn manifest_to_pairs_to_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let mut records = Vec::new();
    for i in 0..4 {
        let path = dir.path().join(format!("img{i}.png"));
        noisy(64, 48, 10 + i).save_png(&path).unwrap();
        records.push(analyze_record(&path, &format!("img{i}"), &NoLabels, None));
    }
    let manifest = dir.path().join("m.jsonl");
    write_jsonl(&manifest, &records).unwrap();
    let records = read_manifest(&manifest).unwrap();

    let policy = CurationPolicy {
        min_side: 1,
        min_bytes: 1,
        min_hf_ratio: 1e-9,
        target_count: 3,
        freq_bins: 2,
        ..CurationPolicy::default()
    };
    let out = curate(records, &policy, 42).unwrap();
    assert_eq!(out.selected.len(), 3);
    assert!(out.selected.iter().all(|r| r.selected));

    for record in &out.selected {
        let img = load_image(&record.path).unwrap().image;
        for d in Degradation::standard_menu() {
            let pair = make_pair(&img, &DegradationSpec::new(d, 5)).unwrap();
            let (w, h) = match d {
                Degradation::Sr { scale } => (64 / scale as usize, 48 / scale as usize),
                _ => (64, 48),
            };
            assert_eq!((pair.degraded.width(), pair.degraded.height()), (w, h), "{d:?}");
            if !matches!(d, Degradation::Sr { .. }) {
                let report = evaluate_pair(&record.id, &pair.degraded, &pair.target, 0).unwrap();
                assert!(report.psnr.is_finite() && report.psnr > 5.0, "{d:?}: {}", report.psnr);
                assert!(report.ssim < 1.0);
            }
        }
    }
}
