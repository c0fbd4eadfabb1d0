use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::record::ImageRecord;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Granularity {
    Broad,
    Sub,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LogBase {
    Natural,
    Two,
    Ten,
}

impl LogBase {
    fn ln_base(self) -> f64 {
        match self {
            LogBase::Natural => 1.0,
            LogBase::Two => std::f64::consts::LN_2,
            LogBase::Ten => std::f64::consts::LN_10,
        }
    }
}

/// Shannon entropy `-sum p log p` of a histogram; zero counts contribute nothing.
pub fn entropy_from_counts<I: IntoIterator<Item = usize>>(counts: I, base: LogBase) -> Option<f64> {
    let counts: Vec<usize> = counts.into_iter().filter(|&c| c > 0).collect();
    let total: usize = counts.iter().sum();
    if total == 0 {
        return None;
    }
    let h: f64 = counts
        .iter()
        .map(|&c| {
            let p = c as f64 / total as f64;
            -p * p.ln()
        })
        .sum();
    Some(h / base.ln_base())
}

/// Semantic diversity of a labelled record set.
pub fn diversity_entropy(records: &[ImageRecord], granularity: Granularity, base: LogBase) -> Result<f64> {
    if records.is_empty() {
        return Err(Error::EmptyInput("entropy of an empty record set"));
    }
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    for r in records {
        let key = match (granularity, r.broad_class, r.sub_category) {
            (Granularity::Broad, Some(b), _) => b.to_string(),
            (Granularity::Sub, _, Some(s)) => s.to_string(),
            _ => return Err(Error::Unlabeled { id: r.id.clone() }),
        };
        *counts.entry(key).or_insert(0) += 1;
    }
    Ok(entropy_from_counts(counts.into_values(), base).expect("nonempty"))
}
