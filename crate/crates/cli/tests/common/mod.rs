#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::Path;
use std::process::{Command, Output};

use hqc_core::RasterImage;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};
use walkdir::WalkDir;

/// Smooth colour waves plus uniform noise of the given amplitude.
pub fn textured(width: usize, height: usize, noise: i32, seed: u64) -> RasterImage {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let fx = 0.02 + (seed % 7) as f64 * 0.01;
    let fy = 0.03 + (seed % 5) as f64 * 0.01;
    let mut samples = Vec::with_capacity(width * height * 3);
    for y in 0..height {
        for x in 0..width {
            for c in 0..3 {
                let wave = 60.0 * ((x as f64 * fx + c as f64).sin() * (y as f64 * fy).cos());
                let n = if noise > 0 { rng.random_range(-noise..=noise) } else { 0 };
                samples.push((128.0 + wave + n as f64).round().clamp(0.0, 255.0) as u8);
            }
        }
    }
    RasterImage::new(width, height, 3, samples).unwrap()
}

/// Writes `img_000.png`, `img_001.png`, ... and returns their ids.
pub fn write_corpus(dir: &Path, count: usize, width: usize, height: usize, noise: i32) -> Vec<String> {
    std::fs::create_dir_all(dir).unwrap();
    (0..count)
        .map(|i| {
            let id = format!("img_{i:03}");
            textured(width, height, noise, i as u64 + 1)
                .save_png(dir.join(format!("{id}.png")))
                .unwrap();
            id
        })
        .collect()
}

/// Writes a labels manifest cycling through the named sub-categories.
pub fn write_labels(path: &Path, ids: &[String]) {
    let names: Vec<_> = hqc_core::curation::SubCategory::named().map(|s| s.name()).collect();
    let text: String = ids
        .iter()
        .enumerate()
        .map(|(i, id)| format!("{{\"id\":\"{id}\",\"sub_category\":\"{}\"}}\n", names[i % names.len()]))
        .collect();
    std::fs::write(path, text).unwrap();
}

/// SHA-256 of every file under `root`, keyed by relative path.
pub fn hash_tree(root: &Path) -> BTreeMap<String, String> {
    WalkDir::new(root)
        .into_iter()
        .map(|e| e.unwrap())
        .filter(|e| e.file_type().is_file())
        .map(|e| {
            let rel = e.path().strip_prefix(root).unwrap().to_string_lossy().into_owned();
            let digest = Sha256::digest(std::fs::read(e.path()).unwrap());
            (rel, digest.iter().map(|b| format!("{b:02x}")).collect())
        })
        .collect()
}

pub fn hqc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hqc"))
        .args(args)
        .env("HQC_LOG", "warn")
        .output()
        .expect("binary runs")
}

pub fn ok(args: &[&str]) -> String {
    let out = hqc(args);
    assert!(
        out.status.success(),
        "hqc {args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

pub fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}
