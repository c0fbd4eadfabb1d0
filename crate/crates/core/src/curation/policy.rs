use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Target distribution for the high-frequency ratio of the selection.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FreqTarget {
    pub mean: f64,
    pub stddev: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuotaMode {
    /// Equal quota per sub-category, unused quota spread over the others.
    Uniform,
    /// Quotas follow the pool's own category shares.
    Proportional,
}

/// Thresholds and targets driving selection. Missing fields take defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CurationPolicy {
    /// Minimum of width and height, pixels.
    pub min_side: usize,
    /// Minimum encoded file size, bytes.
    pub min_bytes: u64,
    pub min_hf_ratio: f64,
    pub target_count: usize,
    pub freq_bins: usize,
    pub freq_target: FreqTarget,
    pub semantic_quota_mode: QuotaMode,
    /// Analyse texture on a luma plane downscaled to this longest side.
    pub analysis_max_side: Option<usize>,
}

impl Default for CurationPolicy {
    fn default() -> Self {
        Self {
            min_side: 1024,
            min_bytes: 500 * 1024,
            min_hf_ratio: 0.005,
            target_count: 50_000,
            freq_bins: 20,
            freq_target: FreqTarget {
                mean: 0.014,
                stddev: 0.006,
            },
            semantic_quota_mode: QuotaMode::Uniform,
            analysis_max_side: None,
        }
    }
}

impl CurationPolicy {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if self.min_side == 0 || self.min_bytes == 0 {
            return bad("min_side and min_bytes must be positive".into());
        }
        if !(self.min_hf_ratio > 0.0 && self.min_hf_ratio <= 1.0) {
            return bad(format!("min_hf_ratio {} not in (0, 1]", self.min_hf_ratio));
        }
        if self.freq_bins == 0 {
            return bad("freq_bins must be positive".into());
        }
        if !(self.freq_target.stddev > 0.0 && self.freq_target.mean.is_finite()) {
            return bad("freq_target needs a finite mean and positive stddev".into());
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let policy: CurationPolicy = serde_json::from_str(text)?;
        policy.validate()?;
        Ok(policy)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partial_policy_uses_defaults() {
        let p = CurationPolicy::from_json(r#"{"target_count": 10, "semantic_quota_mode": "proportional"}"#).unwrap();
        assert_eq!(p.target_count, 10);
        assert_eq!(p.min_side, 1024);
        assert_eq!(p.min_bytes, 512_000);
        assert_eq!(p.semantic_quota_mode, QuotaMode::Proportional);
    }

    #[test]
    fn unknown_fields_rejected() {
        assert!(CurationPolicy::from_json(r#"{"min_sid": 10}"#).is_err());
        assert!(CurationPolicy::from_json(r#"{"freq_target": {"mean": 0.1, "stddev": 0.1, "x": 1}}"#).is_err());
    }

    #[test]
    fn invalid_thresholds_rejected() {
        assert!(CurationPolicy::from_json(r#"{"min_hf_ratio": 0}"#).is_err());
        assert!(CurationPolicy::from_json(r#"{"freq_bins": 0}"#).is_err());
    }
}
