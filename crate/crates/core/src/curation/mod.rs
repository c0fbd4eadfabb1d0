//! Dataset curation: per-image analysis, hard filters, distribution
//! balancing, and benchmark splits.

pub mod analyze;
pub mod balance;
pub mod entropy;
pub mod filter;
pub mod policy;
pub mod record;
pub mod split;
pub mod taxonomy;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub use analyze::{analyze_record, CorpusSummary, LabelProvider, Labels, ManifestLabels, NoLabels};
pub use balance::{balance_combined, balance_frequency, balance_semantics, semantic_allocation, FrequencyBins};
pub use entropy::{diversity_entropy, entropy_from_counts, Granularity, LogBase};
pub use filter::{apply_hard_filters, reason_counts, rejection_reason, RejectReason, Rejection};
pub use policy::{CurationPolicy, FreqTarget, QuotaMode};
pub use record::{read_jsonl, read_manifest, write_jsonl, ImageRecord};
pub use split::{freq_band_split, split_benchmark, BenchmarkQuotas, BenchmarkSplit, FreqBand, FreqBandSplit};
pub use taxonomy::{BroadClass, SubCategory};

use crate::error::Result;

#[derive(Debug, Clone, PartialEq)]
pub struct CurationOutcome {
    pub selected: Vec<ImageRecord>,
    pub rejected: Vec<Rejection>,
    /// Records that passed the hard filters but were not sampled.
    pub unselected: usize,
}

/// Counts that summarize a curation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurationReport {
    pub input: usize,
    pub passed_filters: usize,
    pub selected: usize,
    pub acceptance_rate: f64,
    pub rejections: BTreeMap<RejectReason, usize>,
}

impl CurationOutcome {
    pub fn report(&self) -> CurationReport {
        let passed = self.selected.len() + self.unselected;
        let input = passed + self.rejected.len();
        CurationReport {
            input,
            passed_filters: passed,
            selected: self.selected.len(),
            acceptance_rate: if input == 0 {
                0.0
            } else {
                self.selected.len() as f64 / input as f64
            },
            rejections: reason_counts(&self.rejected),
        }
    }
}

/// Hard filters, then semantic quotas, then frequency quotas within each
/// semantic bucket. A pool smaller than the target is taken whole.
pub fn curate(records: Vec<ImageRecord>, policy: &CurationPolicy, seed: u64) -> Result<CurationOutcome> {
    policy.validate()?;
    let (kept, rejected) = apply_hard_filters(records, policy);
    if kept.is_empty() {
        return Ok(CurationOutcome {
            selected: Vec::new(),
            rejected,
            unselected: 0,
        });
    }
    let effective = CurationPolicy {
        target_count: policy.target_count.min(kept.len()),
        ..policy.clone()
    };
    let selected = balance_combined(&kept, &effective, seed)?;
    Ok(CurationOutcome {
        unselected: kept.len() - selected.len(),
        selected,
        rejected,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(i: usize, side: usize, bytes: u64, hf: f64) -> ImageRecord {
        ImageRecord::new(
            format!("r{i:04}"),
            "r.png",
            side,
            side,
            bytes,
            hf,
            Some(SubCategory::ALL[i % 16]),
        )
    }

    #[test]
    fn all_rejected_gives_empty_selection() {
        let records: Vec<_> = (0..20).map(|i| rec(i, 512, 1 << 20, 0.02)).collect();
        let out = curate(records, &CurationPolicy::default(), 0).unwrap();
        assert!(out.selected.is_empty());
        let report = out.report();
        assert_eq!(report.rejections[&RejectReason::Resolution], 20);
        assert_eq!(report.acceptance_rate, 0.0);
    }

    #[test]
    fn conserves_and_balances() {
        let records: Vec<_> = (0..800)
            .map(|i| {
                rec(
                    i,
                    if i % 10 == 0 { 800 } else { 1200 },
                    600_000,
                    0.006 + (i % 37) as f64 * 0.0005,
                )
            })
            .collect();
        let policy = CurationPolicy {
            target_count: 320,
            ..CurationPolicy::default()
        };
        let out = curate(records.clone(), &policy, 11).unwrap();
        let report = out.report();
        assert_eq!(report.input, 800);
        assert_eq!(report.selected, 320);
        assert_eq!(report.passed_filters + out.rejected.len(), 800);
        assert_eq!(out, curate(records, &policy, 11).unwrap());
        assert!((report.acceptance_rate - 0.4).abs() < 1e-12);
    }

    #[test]
    fn small_pool_taken_whole() {
        let records: Vec<_> = (0..30).map(|i| rec(i, 2000, 1 << 20, 0.01)).collect();
        let out = curate(records, &CurationPolicy::default(), 0).unwrap();
        assert_eq!(out.selected.len(), 30);
        assert_eq!(out.unselected, 0);
    }
}
