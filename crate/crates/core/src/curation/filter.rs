use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::policy::CurationPolicy;
use super::record::ImageRecord;

/// First criterion a record failed, checked in this order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RejectReason {
    Invalid,
    Resolution,
    Compression,
    Texture,
}

impl fmt::Display for RejectReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RejectReason::Invalid => "invalid",
            RejectReason::Resolution => "resolution",
            RejectReason::Compression => "compression",
            RejectReason::Texture => "texture",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rejection {
    pub id: String,
    pub reason: RejectReason,
}

pub fn rejection_reason(record: &ImageRecord, policy: &CurationPolicy) -> Option<RejectReason> {
    if !record.is_valid() {
        Some(RejectReason::Invalid)
    } else if record.width.min(record.height) < policy.min_side {
        Some(RejectReason::Resolution)
    } else if record.encoded_bytes < policy.min_bytes {
        Some(RejectReason::Compression)
    } else if record.hf_ratio < policy.min_hf_ratio {
        Some(RejectReason::Texture)
    } else {
        None
    }
}

/// Splits records into those passing every hard threshold and the rest.
pub fn apply_hard_filters(records: Vec<ImageRecord>, policy: &CurationPolicy) -> (Vec<ImageRecord>, Vec<Rejection>) {
    let mut kept = Vec::new();
    let mut rejected = Vec::new();
    for r in records {
        match rejection_reason(&r, policy) {
            None => kept.push(r),
            Some(reason) => rejected.push(Rejection { id: r.id, reason }),
        }
    }
    (kept, rejected)
}

pub fn reason_counts(rejected: &[Rejection]) -> BTreeMap<RejectReason, usize> {
    let mut counts = BTreeMap::new();
    for r in rejected {
        *counts.entry(r.reason).or_insert(0) += 1;
    }
    counts
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rec(id: &str, w: usize, h: usize, bytes: u64, ratio: f64) -> ImageRecord {
        ImageRecord::new(id, format!("{id}.png"), w, h, bytes, ratio, None)
    }

    #[test]
    fn boundary_cases() {
        let policy = CurationPolicy::default();
        let records = vec![
            rec("side", 1023, 2000, 900_000, 0.02),
            rec("bytes", 1024, 1024, 499 * 1024, 0.02),
            rec("ratio", 1024, 1024, 600 * 1024, 0.0049),
            rec("ok", 1024, 1024, 600 * 1024, 0.02),
            rec("edge", 1024, 4000, 512_000, 0.005),
            ImageRecord::invalid("bad", "bad.png", "truncated"),
        ];
        let (kept, rejected) = apply_hard_filters(records, &policy);
        let ids: Vec<_> = kept.iter().map(|r| r.id.as_str()).collect();
        assert_eq!(ids, ["ok", "edge"]);
        let reasons: Vec<_> = rejected.iter().map(|r| (r.id.as_str(), r.reason)).collect();
        assert_eq!(
            reasons,
            [
                ("side", RejectReason::Resolution),
                ("bytes", RejectReason::Compression),
                ("ratio", RejectReason::Texture),
                ("bad", RejectReason::Invalid),
            ]
        );
    }

    #[test]
    fn first_failing_reason_wins() {
        let policy = CurationPolicy::default();
        assert_eq!(
            rejection_reason(&rec("x", 10, 10, 1, 0.0), &policy),
            Some(RejectReason::Resolution)
        );
    }

    proptest! {
        #[test]
        fn idempotent_and_lossless(
            specs in prop::collection::vec((500usize..1500, 500usize..1500, 0u64..1_000_000, 0.0f64..0.02), 0..60)
        ) {
            let policy = CurationPolicy::default();
            let records: Vec<_> = specs.iter().enumerate()
                .map(|(i, &(w, h, b, r))| rec(&format!("r{i}"), w, h, b, r))
                .collect();
            let n = records.len();
            let (kept, rejected) = apply_hard_filters(records, &policy);
            prop_assert_eq!(kept.len() + rejected.len(), n);
            let (again, none) = apply_hard_filters(kept.clone(), &policy);
            prop_assert_eq!(again, kept);
            prop_assert!(none.is_empty());
        }
    }
}
