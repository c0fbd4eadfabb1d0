//! Quota-based subset selection: Gaussian frequency balancing and semantic
//! balancing.
//!
//! Every random choice is a seeded shuffle of an id-sorted list, so a
//! selection depends only on the records, the policy and the seed.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ContinuousCDF, Normal};

use super::policy::{CurationPolicy, FreqTarget, QuotaMode};
use super::record::ImageRecord;
use super::taxonomy::SubCategory;
use crate::error::{Error, Result};

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives an independent stream seed for one bucket of a selection.
pub(crate) fn stream_seed(seed: u64, stage: u64, bucket: u64) -> u64 {
    splitmix64(seed ^ splitmix64(stage.wrapping_mul(0x1000_0000_01b3) ^ splitmix64(bucket)))
}

/// Picks `count` records: id order, seeded shuffle, take the prefix.
pub(crate) fn seeded_pick(mut pool: Vec<&ImageRecord>, count: usize, seed: u64) -> Vec<&ImageRecord> {
    pool.sort_by(|a, b| a.id.cmp(&b.id));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    pool.shuffle(&mut rng);
    pool.truncate(count);
    pool
}

/// Largest-remainder apportionment of `total` units by nonnegative weights.
/// Ties in the remainder go to the lower index; all-zero weights split evenly.
pub fn apportion(weights: &[f64], total: usize) -> Vec<usize> {
    if weights.is_empty() {
        return Vec::new();
    }
    let sum: f64 = weights.iter().sum();
    let shares: Vec<f64> = if sum > 0.0 {
        weights.iter().map(|w| w / sum * total as f64).collect()
    } else {
        vec![total as f64 / weights.len() as f64; weights.len()]
    };
    let mut alloc: Vec<usize> = shares.iter().map(|s| s.floor() as usize).collect();
    let assigned: usize = alloc.iter().sum();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| {
        let (fa, fb) = (shares[a] - shares[a].floor(), shares[b] - shares[b].floor());
        fb.total_cmp(&fa).then(a.cmp(&b))
    });
    for &i in order.iter().cycle().take(total.saturating_sub(assigned)) {
        alloc[i] += 1;
    }
    alloc
}

/// Apportions by weight, then moves every unit a bin cannot fill to the bins
/// with spare capacity, in proportion to that spare capacity.
pub fn apportion_with_capacity(weights: &[f64], caps: &[usize], total: usize) -> Result<Vec<usize>> {
    let available: usize = caps.iter().sum();
    if total > available {
        return Err(Error::InsufficientPool {
            requested: total,
            available,
        });
    }
    let mut alloc = apportion(weights, total);
    loop {
        let shortfall: usize = alloc.iter().zip(caps).map(|(&a, &c)| a.saturating_sub(c)).sum();
        if shortfall == 0 {
            return Ok(alloc);
        }
        for (a, &c) in alloc.iter_mut().zip(caps) {
            *a = (*a).min(c);
        }
        let spare: Vec<f64> = alloc.iter().zip(caps).map(|(&a, &c)| (c - a) as f64).collect();
        for (a, extra) in alloc.iter_mut().zip(apportion(&spare, shortfall)) {
            *a += extra;
        }
    }
}

/// Max-min fair split of `total` under per-bucket caps; leftover single
/// units go to the lowest-index unsaturated buckets.
pub fn water_fill(caps: &[usize], total: usize) -> Result<Vec<usize>> {
    let available: usize = caps.iter().sum();
    if total > available {
        return Err(Error::InsufficientPool {
            requested: total,
            available,
        });
    }
    let mut alloc = vec![0usize; caps.len()];
    let mut remaining = total;
    let mut active: Vec<usize> = (0..caps.len()).filter(|&i| caps[i] > 0).collect();
    while remaining > 0 {
        let share = remaining / active.len();
        if share == 0 {
            for &i in active.iter().take(remaining) {
                alloc[i] += 1;
            }
            break;
        }
        for &i in &active {
            let give = share.min(caps[i] - alloc[i]);
            alloc[i] += give;
            remaining -= give;
        }
        active.retain(|&i| alloc[i] < caps[i]);
    }
    Ok(alloc)
}

/// Equal-width bins over a closed hf-ratio range.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrequencyBins {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

impl FrequencyBins {
    /// Bins spanning the min..max hf ratio of `records`.
    pub fn spanning(records: &[ImageRecord], count: usize) -> Option<Self> {
        let lo = records.iter().map(|r| r.hf_ratio).min_by(f64::total_cmp)?;
        let hi = records.iter().map(|r| r.hf_ratio).max_by(f64::total_cmp)?;
        Some(Self {
            lo,
            hi,
            count: count.max(1),
        })
    }

    pub fn width(&self) -> f64 {
        (self.hi - self.lo) / self.count as f64
    }

    pub fn index(&self, ratio: f64) -> usize {
        let w = self.width();
        if w <= 0.0 {
            return 0;
        }
        (((ratio - self.lo) / w).floor().max(0.0) as usize).min(self.count - 1)
    }

    pub fn edges(&self, i: usize) -> (f64, f64) {
        let w = self.width();
        let hi = if i + 1 == self.count {
            self.hi
        } else {
            self.lo + w * (i + 1) as f64
        };
        (self.lo + w * i as f64, hi)
    }

    /// Target Gaussian mass over each bin.
    pub fn gaussian_weights(&self, target: FreqTarget) -> Vec<f64> {
        let normal = Normal::new(target.mean, target.stddev).expect("validated stddev");
        if self.width() <= 0.0 {
            let mut w = vec![0.0; self.count];
            w[0] = 1.0;
            return w;
        }
        (0..self.count)
            .map(|i| {
                let (a, b) = self.edges(i);
                normal.cdf(b) - normal.cdf(a)
            })
            .collect()
    }

    /// Per-bin quotas for `total` records, proportional to Gaussian mass.
    pub fn gaussian_quotas(&self, target: FreqTarget, total: usize) -> Vec<usize> {
        apportion(&self.gaussian_weights(target), total)
    }
}

/// Frequency-quota selection of `count` records from `pool`, binned by `bins`.
fn select_by_frequency<'a>(
    pool: &[&'a ImageRecord],
    count: usize,
    bins: &FrequencyBins,
    target: FreqTarget,
    seed: u64,
) -> Result<Vec<&'a ImageRecord>> {
    let mut by_bin: Vec<Vec<&ImageRecord>> = vec![Vec::new(); bins.count];
    for &r in pool {
        by_bin[bins.index(r.hf_ratio)].push(r);
    }
    let caps: Vec<usize> = by_bin.iter().map(Vec::len).collect();
    let quotas = apportion_with_capacity(&bins.gaussian_weights(target), &caps, count)?;
    let mut out = Vec::with_capacity(count);
    for (i, (members, quota)) in by_bin.into_iter().zip(quotas).enumerate() {
        out.extend(seeded_pick(members, quota, stream_seed(seed, 1, i as u64)));
    }
    Ok(out)
}

fn finish(mut picked: Vec<&ImageRecord>) -> Vec<ImageRecord> {
    picked.sort_by(|a, b| a.id.cmp(&b.id));
    picked
        .into_iter()
        .map(|r| ImageRecord {
            selected: true,
            ..r.clone()
        })
        .collect()
}

fn check_pool(len: usize, target: usize) -> Result<()> {
    if len == 0 {
        return Err(Error::EmptyInput("no records to balance"));
    }
    if target > len {
        return Err(Error::InsufficientPool {
            requested: target,
            available: len,
        });
    }
    Ok(())
}

/// Picks `policy.target_count` records whose hf-ratio histogram follows the
/// policy's target Gaussian over `policy.freq_bins` equal-width bins.
pub fn balance_frequency(kept: &[ImageRecord], policy: &CurationPolicy, seed: u64) -> Result<Vec<ImageRecord>> {
    check_pool(kept.len(), policy.target_count)?;
    let bins = FrequencyBins::spanning(kept, policy.freq_bins).expect("nonempty");
    let pool: Vec<&ImageRecord> = kept.iter().collect();
    let picked = select_by_frequency(&pool, policy.target_count, &bins, policy.freq_target, seed)?;
    Ok(finish(picked))
}

fn group_by_category(records: &[ImageRecord]) -> Result<BTreeMap<SubCategory, Vec<&ImageRecord>>> {
    let mut groups: BTreeMap<SubCategory, Vec<&ImageRecord>> = BTreeMap::new();
    for r in records {
        let cat = r.sub_category.ok_or_else(|| Error::Unlabeled { id: r.id.clone() })?;
        groups.entry(cat).or_default().push(r);
    }
    Ok(groups)
}

/// How many records each sub-category contributes to a balanced selection.
pub fn semantic_allocation(kept: &[ImageRecord], policy: &CurationPolicy) -> Result<BTreeMap<SubCategory, usize>> {
    check_pool(kept.len(), policy.target_count)?;
    let groups = group_by_category(kept)?;
    let caps: Vec<usize> = SubCategory::ALL
        .iter()
        .map(|c| groups.get(c).map_or(0, Vec::len))
        .collect();
    let alloc = match policy.semantic_quota_mode {
        QuotaMode::Uniform => water_fill(&caps, policy.target_count)?,
        QuotaMode::Proportional => {
            let weights: Vec<f64> = caps.iter().map(|&c| c as f64).collect();
            apportion_with_capacity(&weights, &caps, policy.target_count)?
        }
    };
    Ok(SubCategory::ALL
        .into_iter()
        .zip(alloc)
        .filter(|&(_, n)| n > 0)
        .collect())
}

/// Picks `policy.target_count` records with balanced sub-category counts.
pub fn balance_semantics(kept: &[ImageRecord], policy: &CurationPolicy, seed: u64) -> Result<Vec<ImageRecord>> {
    let alloc = semantic_allocation(kept, policy)?;
    let mut groups = group_by_category(kept)?;
    let mut picked = Vec::with_capacity(policy.target_count);
    for (cat, n) in alloc {
        let members = groups.remove(&cat).unwrap_or_default();
        picked.extend(seeded_pick(members, n, stream_seed(seed, 2, cat as u64)));
    }
    Ok(finish(picked))
}

/// Semantic quotas first, then frequency quotas inside every category bucket.
/// Bins span the whole pool so all buckets share one histogram layout.
/// Unlabelled pools skip the semantic stage.
pub fn balance_combined(kept: &[ImageRecord], policy: &CurationPolicy, seed: u64) -> Result<Vec<ImageRecord>> {
    check_pool(kept.len(), policy.target_count)?;
    let labelled = kept.iter().filter(|r| r.sub_category.is_some()).count();
    if labelled == 0 {
        return balance_frequency(kept, policy, seed);
    }
    if labelled != kept.len() {
        let missing = kept.iter().find(|r| r.sub_category.is_none()).expect("some unlabelled");
        return Err(Error::Unlabeled { id: missing.id.clone() });
    }
    let bins = FrequencyBins::spanning(kept, policy.freq_bins).expect("nonempty");
    let alloc = semantic_allocation(kept, policy)?;
    let groups = group_by_category(kept)?;
    let mut picked = Vec::with_capacity(policy.target_count);
    for (cat, n) in alloc {
        let seed = stream_seed(seed, 3, cat as u64);
        picked.extend(select_by_frequency(&groups[&cat], n, &bins, policy.freq_target, seed)?);
    }
    Ok(finish(picked))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curation::entropy::{entropy_from_counts, LogBase};
    use proptest::prelude::*;

    fn rec(i: usize, ratio: f64, cat: Option<SubCategory>) -> ImageRecord {
        ImageRecord::new(format!("img{i:05}"), "p.png", 2048, 2048, 1 << 20, ratio, cat)
    }

    fn policy(target: usize, bins: usize) -> CurationPolicy {
        CurationPolicy {
            target_count: target,
            freq_bins: bins,
            ..CurationPolicy::default()
        }
    }

    #[test]
    fn apportion_basics() {
        assert_eq!(apportion(&[1.0, 1.0, 1.0], 10), vec![4, 3, 3]);
        assert_eq!(apportion(&[0.0, 0.0], 3), vec![2, 1]);
        assert_eq!(apportion(&[3.0, 1.0], 8), vec![6, 2]);
        assert_eq!(apportion(&[], 5), Vec::<usize>::new());
    }

    #[test]
    fn capacity_redistribution() {
        // Bin 0 wants 5 but holds 1; its 4 extra go to bins by spare capacity (9 vs 3).
        let alloc = apportion_with_capacity(&[5.0, 3.0, 2.0], &[1, 12, 5], 10).unwrap();
        assert_eq!(alloc, vec![1, 6, 3]);
        assert!(apportion_with_capacity(&[1.0], &[2], 3).is_err());
    }

    #[test]
    fn water_fill_is_max_min_fair() {
        assert_eq!(water_fill(&[1, 10, 10, 0], 9).unwrap(), vec![1, 4, 4, 0]);
        assert_eq!(water_fill(&[5, 5, 5], 4).unwrap(), vec![2, 1, 1]);
        assert!(water_fill(&[1, 1], 3).is_err());
    }

    #[test]
    fn exact_pool_is_taken_whole() {
        let p = policy(100, 4);
        let bins = FrequencyBins {
            lo: 0.0,
            hi: 0.04,
            count: 4,
        };
        let quotas = bins.gaussian_quotas(p.freq_target, 100);
        let mut records = Vec::new();
        for (b, &q) in quotas.iter().enumerate() {
            for j in 0..q {
                // Keep bin edges at exactly 0.0 and 0.04 so the spanned range matches.
                let ratio = match (b, j) {
                    (0, 0) => 0.0,
                    (3, 0) => 0.04,
                    _ => 0.01 * b as f64 + 0.005,
                };
                records.push(rec(records.len(), ratio, None));
            }
        }
        let selected = balance_frequency(&records, &p, 1).unwrap();
        assert_eq!(selected.len(), 100);
        assert!(selected.iter().all(|r| r.selected));
    }

    #[test]
    fn empty_bin_quota_is_redistributed() {
        // Ratios fill bins 0, 1 and 3 of 4; bin 2 holds nothing.
        let records: Vec<_> = (0..400)
            .map(|i| {
                let bin = [0, 1, 3][i % 3] as f64;
                rec(i, 0.01 * bin + 0.0001 * (i % 50) as f64 / 50.0 * 99.0, None)
            })
            .collect();
        let p = CurationPolicy {
            freq_target: FreqTarget {
                mean: 0.025,
                stddev: 0.004,
            },
            ..policy(150, 4)
        };
        let bins = FrequencyBins::spanning(&records, 4).unwrap();
        assert!(records.iter().all(|r| bins.index(r.hf_ratio) != 2));
        assert!(bins.gaussian_quotas(p.freq_target, 150)[2] > 0);
        assert_eq!(balance_frequency(&records, &p, 5).unwrap().len(), 150);
    }

    #[test]
    fn too_large_target_rejected() {
        let records: Vec<_> = (0..5).map(|i| rec(i, 0.01, None)).collect();
        assert!(matches!(
            balance_frequency(&records, &policy(6, 3), 0),
            Err(Error::InsufficientPool { .. })
        ));
        assert!(balance_frequency(&[], &policy(0, 3), 0).is_err());
    }

    #[test]
    fn selection_is_deterministic() {
        let records: Vec<_> = (0..500).map(|i| rec(i, (i % 97) as f64 / 3000.0, None)).collect();
        let p = policy(120, 10);
        assert_eq!(
            balance_frequency(&records, &p, 42).unwrap(),
            balance_frequency(&records, &p, 42).unwrap()
        );
        assert_ne!(
            balance_frequency(&records, &p, 42).unwrap(),
            balance_frequency(&records, &p, 43).unwrap()
        );
    }

    fn category_counts(records: &[ImageRecord]) -> Vec<usize> {
        let mut m: BTreeMap<SubCategory, usize> = BTreeMap::new();
        for r in records {
            *m.entry(r.sub_category.unwrap()).or_default() += 1;
        }
        m.into_values().collect()
    }

    #[test]
    fn uniform_pool_gives_uniform_selection() {
        let cats: Vec<_> = SubCategory::named().collect();
        let records: Vec<_> = (0..13 * 40).map(|i| rec(i, 0.01, Some(cats[i % 13]))).collect();
        let selected = balance_semantics(&records, &policy(13 * 10, 5), 3).unwrap();
        let counts = category_counts(&selected);
        assert_eq!(counts, vec![10; 13]);
        let h = entropy_from_counts(counts, LogBase::Natural).unwrap();
        assert!((h - 13f64.ln()).abs() < 1e-9);
    }

    #[test]
    fn skewed_pool_gains_entropy() {
        // 90% food, the rest spread over five categories.
        let others = [
            SubCategory::Animals,
            SubCategory::Map,
            SubCategory::Comic,
            SubCategory::People,
            SubCategory::Furniture,
        ];
        let records: Vec<_> = (0..1000)
            .map(|i| {
                let cat = if i % 10 == 0 {
                    others[(i / 10) % 5]
                } else {
                    SubCategory::Food
                };
                rec(i, 0.01, Some(cat))
            })
            .collect();
        let p = policy(300, 5);
        let selected = balance_semantics(&records, &p, 0).unwrap();
        assert_eq!(selected.len(), 300);
        let h_sel = entropy_from_counts(category_counts(&selected), LogBase::Natural).unwrap();
        let h_pool = entropy_from_counts(category_counts(&records), LogBase::Natural).unwrap();
        let top_n: Vec<_> = records.iter().take(300).cloned().collect();
        let h_top = entropy_from_counts(category_counts(&top_n), LogBase::Natural).unwrap();
        assert!(h_sel > h_pool);
        assert!(h_sel >= h_top);
    }

    #[test]
    fn proportional_mode_tracks_pool() {
        let records: Vec<_> = (0..300)
            .map(|i| {
                rec(
                    i,
                    0.01,
                    Some(if i < 200 {
                        SubCategory::Nature
                    } else {
                        SubCategory::Poster
                    }),
                )
            })
            .collect();
        let p = CurationPolicy {
            semantic_quota_mode: QuotaMode::Proportional,
            ..policy(30, 5)
        };
        let alloc = semantic_allocation(&records, &p).unwrap();
        assert_eq!(alloc[&SubCategory::Nature], 20);
        assert_eq!(alloc[&SubCategory::Poster], 10);
    }

    #[test]
    fn combined_respects_both_quotas() {
        let cats: Vec<_> = SubCategory::named().collect();
        let records: Vec<_> = (0..2600)
            .map(|i| rec(i, 0.005 + (i % 200) as f64 * 0.0001, Some(cats[i % 13])))
            .collect();
        let p = policy(260, 10);
        let selected = balance_combined(&records, &p, 9).unwrap();
        assert_eq!(selected.len(), 260);
        assert_eq!(category_counts(&selected), vec![20; 13]);
        let mut ids: Vec<_> = selected.iter().map(|r| r.id.clone()).collect();
        ids.dedup();
        assert_eq!(ids.len(), 260);

        let mut mixed = records.clone();
        mixed[3].sub_category = None;
        mixed[3].broad_class = None;
        assert!(matches!(balance_combined(&mixed, &p, 9), Err(Error::Unlabeled { .. })));
    }

    proptest! {
        #[test]
        fn counts_are_conserved(
            ratios in prop::collection::vec(0.0f64..0.05, 1..400),
            frac in 0.0f64..=1.0, bins in 1usize..30, seed: u64,
        ) {
            let records: Vec<_> = ratios.iter().enumerate().map(|(i, &r)| rec(i, r, None)).collect();
            let target = (records.len() as f64 * frac) as usize;
            let selected = balance_frequency(&records, &policy(target, bins), seed).unwrap();
            prop_assert_eq!(selected.len(), target);
        }

        #[test]
        fn apportion_sums(weights in prop::collection::vec(0.0f64..10.0, 1..20), total in 0usize..1000) {
            prop_assert_eq!(apportion(&weights, total).iter().sum::<usize>(), total);
        }

        #[test]
        fn capacity_respected(caps in prop::collection::vec(0usize..40, 1..20), seed in 0u64..1000) {
            let total = caps.iter().sum::<usize>() * (seed as usize % 100) / 100;
            let weights: Vec<f64> = (0..caps.len()).map(|i| ((i as u64 * 31 + seed) % 7) as f64).collect();
            let alloc = apportion_with_capacity(&weights, &caps, total).unwrap();
            prop_assert_eq!(alloc.iter().sum::<usize>(), total);
            prop_assert!(alloc.iter().zip(&caps).all(|(a, c)| a <= c));
            let fill = water_fill(&caps, total).unwrap();
            prop_assert_eq!(fill.iter().sum::<usize>(), total);
            prop_assert!(fill.iter().zip(&caps).all(|(a, c)| a <= c));
        }
    }
}
