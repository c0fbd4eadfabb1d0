//! Fine-grained benchmark split and frequency-band partitioning.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::balance::{seeded_pick, stream_seed};
use super::record::ImageRecord;
use super::taxonomy::SubCategory;
use crate::error::{Error, Result};

/// Test images to hold out per sub-category.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BenchmarkQuotas(pub BTreeMap<SubCategory, usize>);

impl Default for BenchmarkQuotas {
    /// 100 per named sub-category, 50 for text scenes, none from "others".
    fn default() -> Self {
        Self(
            SubCategory::named()
                .map(|c| (c, if c == SubCategory::TextScene { 50 } else { 100 }))
                .collect(),
        )
    }
}

impl BenchmarkQuotas {
    pub fn total(&self) -> usize {
        self.0.values().sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkSplit {
    pub train: Vec<ImageRecord>,
    pub test: Vec<ImageRecord>,
}

/// Holds out a seeded random test set with the given per-category sizes.
/// Unlabelled records and categories without a quota stay in train.
pub fn split_benchmark(selected: &[ImageRecord], quotas: &BenchmarkQuotas, seed: u64) -> Result<BenchmarkSplit> {
    let mut groups: BTreeMap<SubCategory, Vec<&ImageRecord>> = BTreeMap::new();
    for r in selected {
        if let Some(c) = r.sub_category {
            groups.entry(c).or_default().push(r);
        }
    }
    let mut test_ids = std::collections::BTreeSet::new();
    for (&cat, &quota) in quotas.0.iter().filter(|(_, &q)| q > 0) {
        let members = groups.remove(&cat).unwrap_or_default();
        if members.len() < quota {
            return Err(Error::InsufficientCategory {
                category: cat.name().to_string(),
                available: members.len(),
                quota,
            });
        }
        for r in seeded_pick(members, quota, stream_seed(seed, 4, cat as u64)) {
            test_ids.insert(r.id.as_str());
        }
    }
    let (test, train) = selected.iter().cloned().partition(|r| test_ids.contains(r.id.as_str()));
    let sort = |mut v: Vec<ImageRecord>| {
        v.sort_by(|a, b| a.id.cmp(&b.id));
        v
    };
    Ok(BenchmarkSplit {
        train: sort(train),
        test: sort(test),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FreqBand {
    Low,
    High,
}

impl FreqBand {
    pub fn of(hf_ratio: f64, threshold: f64) -> Self {
        if hf_ratio >= threshold {
            FreqBand::High
        } else {
            FreqBand::Low
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            FreqBand::Low => "low",
            FreqBand::High => "high",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FreqBandSplit {
    pub low: Vec<ImageRecord>,
    pub high: Vec<ImageRecord>,
}

fn mean_ratio(records: &[ImageRecord]) -> Option<f64> {
    (!records.is_empty()).then(|| records.iter().map(|r| r.hf_ratio).sum::<f64>() / records.len() as f64)
}

impl FreqBandSplit {
    pub fn low_mean(&self) -> Option<f64> {
        mean_ratio(&self.low)
    }

    pub fn high_mean(&self) -> Option<f64> {
        mean_ratio(&self.high)
    }
}

/// Partitions records into high (ratio >= threshold) and low bands.
pub fn freq_band_split(records: &[ImageRecord], threshold: f64) -> FreqBandSplit {
    let (high, low) = records
        .iter()
        .cloned()
        .partition(|r| FreqBand::of(r.hf_ratio, threshold) == FreqBand::High);
    FreqBandSplit { low, high }
}
