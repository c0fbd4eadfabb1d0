use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::taxonomy::{BroadClass, SubCategory};
use crate::error::{Error, Result};

/// Per-image statistics row; one JSON Lines entry in a manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageRecord {
    pub id: String,
    pub path: PathBuf,
    pub width: usize,
    pub height: usize,
    pub encoded_bytes: u64,
    pub bpp: f64,
    pub hf_ratio: f64,
    pub broad_class: Option<BroadClass>,
    pub sub_category: Option<SubCategory>,
    #[serde(default)]
    pub selected: bool,
    /// Longest side the luma plane was downscaled to before the ratio was measured.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub analysis_max_side: Option<usize>,
    /// Set when the file could not be analysed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub invalid: Option<String>,
}

impl ImageRecord {
    /// Record with consistent derived fields: bpp from size and dims, class from sub-category.
    pub fn new(
        id: impl Into<String>,
        path: impl Into<PathBuf>,
        width: usize,
        height: usize,
        encoded_bytes: u64,
        hf_ratio: f64,
        sub_category: Option<SubCategory>,
    ) -> Self {
        let pixels = (width * height).max(1) as f64;
        Self {
            id: id.into(),
            path: path.into(),
            width,
            height,
            encoded_bytes,
            bpp: 8.0 * encoded_bytes as f64 / pixels,
            hf_ratio,
            broad_class: sub_category.map(SubCategory::broad_class),
            sub_category,
            selected: false,
            analysis_max_side: None,
            invalid: None,
        }
    }

    pub fn invalid(id: impl Into<String>, path: impl Into<PathBuf>, reason: impl Into<String>) -> Self {
        Self {
            invalid: Some(reason.into()),
            ..Self::new(id, path, 0, 0, 0, 0.0, None)
        }
    }

    pub fn pixels(&self) -> usize {
        self.width * self.height
    }

    pub fn is_valid(&self) -> bool {
        self.invalid.is_none()
    }

    /// Checks the cross-field invariants of a valid record.
    pub fn check_consistency(&self) -> Result<()> {
        if !self.is_valid() {
            return Ok(());
        }
        let expected = 8.0 * self.encoded_bytes as f64 / self.pixels().max(1) as f64;
        if (expected - self.bpp).abs() > 1e-9 * expected.max(1.0) {
            return Err(Error::InvalidParameter(format!(
                "record {}: bpp {} disagrees with {} bytes over {}x{}",
                self.id, self.bpp, self.encoded_bytes, self.width, self.height
            )));
        }
        match (self.broad_class, self.sub_category) {
            (Some(b), Some(s)) if s.broad_class() != b => Err(Error::InvalidParameter(format!(
                "record {}: sub-category {s} does not belong to {b}",
                self.id
            ))),
            (Some(_), None) | (None, Some(_)) => Err(Error::InvalidParameter(format!(
                "record {}: broad class and sub-category must be given together",
                self.id
            ))),
            _ if !(0.0..=1.0).contains(&self.hf_ratio) => Err(Error::InvalidParameter(format!(
                "record {}: hf_ratio {} outside [0, 1]",
                self.id, self.hf_ratio
            ))),
            _ => Ok(()),
        }
    }
}

pub fn read_jsonl<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<Vec<T>> {
    let path = path.as_ref();
    let io_err = |source| Error::Io {
        path: path.to_path_buf(),
        source,
    };
    let reader = BufReader::new(File::open(path).map_err(io_err)?);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(io_err)?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|source| Error::Manifest { line: i + 1, source })?);
    }
    Ok(out)
}

pub fn write_jsonl<'a, T: Serialize + 'a>(
    path: impl AsRef<Path>,
    items: impl IntoIterator<Item = &'a T>,
) -> Result<()> {
    let path = path.as_ref();
    let io_err = |source| Error::Io {
        path: path.to_path_buf(),
        source,
    };
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(io_err)?;
    }
    let mut w = BufWriter::new(File::create(path).map_err(io_err)?);
    for item in items {
        serde_json::to_writer(&mut w, item)?;
        w.write_all(b"\n").map_err(io_err)?;
    }
    w.flush().map_err(io_err)
}

/// Reads a record manifest and validates every row.
pub fn read_manifest(path: impl AsRef<Path>) -> Result<Vec<ImageRecord>> {
    let records: Vec<ImageRecord> = read_jsonl(path)?;
    for r in &records {
        r.check_consistency()?;
    }
    Ok(records)
}
