use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use hqc_core::curation::{
    freq_band_split, read_manifest, split_benchmark, write_jsonl, BenchmarkQuotas, BenchmarkSplit, FreqBandSplit,
};

use crate::util::write_json;

/// Writes `train.jsonl` and `test.jsonl` under `out`.
pub fn run_split_bench(manifest: &Path, quotas: Option<&PathBuf>, out: &Path, seed: u64) -> Result<BenchmarkSplit> {
    let quotas = match quotas {
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            serde_json::from_str(&text).with_context(|| format!("parsing quotas {}", p.display()))?
        }
        None => BenchmarkQuotas::default(),
    };
    let records = read_manifest(manifest).with_context(|| format!("reading {}", manifest.display()))?;
    let split = split_benchmark(&records, &quotas, seed)?;
    write_jsonl(out.join("train.jsonl"), &split.train)?;
    write_jsonl(out.join("test.jsonl"), &split.test)?;
    Ok(split)
}

#[derive(Debug, serde::Serialize)]
struct BandSummary {
    threshold: f64,
    low_count: usize,
    high_count: usize,
    low_mean_hf_ratio: Option<f64>,
    high_mean_hf_ratio: Option<f64>,
}

/// Writes `low.jsonl`, `high.jsonl` and `bands.json` under `out`.
pub fn run_freq_split(manifest: &Path, threshold: f64, out: &Path) -> Result<FreqBandSplit> {
    let records: Vec<_> = read_manifest(manifest)
        .with_context(|| format!("reading {}", manifest.display()))?
        .into_iter()
        .filter(|r| r.is_valid())
        .collect();
    let split = freq_band_split(&records, threshold);
    write_jsonl(out.join("low.jsonl"), &split.low)?;
    write_jsonl(out.join("high.jsonl"), &split.high)?;
    write_json(
        &out.join("bands.json"),
        &BandSummary {
            threshold,
            low_count: split.low.len(),
            high_count: split.high.len(),
            low_mean_hf_ratio: split.low_mean(),
            high_mean_hf_ratio: split.high_mean(),
        },
    )?;
    Ok(split)
}
