use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use hqc_core::curation::ImageRecord;
use hqc_core::curation::{analyze_record, write_jsonl, CorpusSummary, LabelProvider, ManifestLabels, NoLabels};
use log::info;
use rayon::prelude::*;

use crate::util::{list_images, sibling, thread_pool, write_json};

#[derive(Debug, Clone)]
pub struct AnalyzeOptions {
    pub dir: PathBuf,
    pub labels: Option<PathBuf>,
    pub out: PathBuf,
    pub workers: usize,
    pub max_side: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct AnalyzeOutcome {
    pub records: Vec<ImageRecord>,
    pub summary: CorpusSummary,
    pub summary_path: PathBuf,
}

impl AnalyzeOutcome {
    pub fn failures(&self) -> Vec<(&str, &str)> {
        self.records
            .iter()
            .filter_map(|r| r.invalid.as_deref().map(|why| (r.id.as_str(), why)))
            .collect()
    }
}

/// Measures every image under `dir`, writes the manifest and its summary.
pub fn run(opts: &AnalyzeOptions) -> Result<AnalyzeOutcome> {
    let files = list_images(&opts.dir)?;
    info!("analysing {} images with {} workers", files.len(), opts.workers);
    let labels: Box<dyn LabelProvider> = match &opts.labels {
        Some(path) => {
            Box::new(ManifestLabels::load(path).with_context(|| format!("loading labels from {}", path.display()))?)
        }
        None => Box::new(NoLabels),
    };
    let provider: &dyn LabelProvider = labels.as_ref();
    let pool = thread_pool(opts.workers)?;
    let mut records: Vec<ImageRecord> = pool.install(|| {
        files
            .par_iter()
            .map(|(id, path)| analyze_record(path, id, provider, opts.max_side))
            .collect()
    });
    records.sort_by(|a, b| a.id.cmp(&b.id));

    write_jsonl(&opts.out, &records)?;
    let summary = CorpusSummary::from_records(&records);
    let summary_path = sibling(&opts.out, "summary.json");
    write_json(&summary_path, &summary)?;
    Ok(AnalyzeOutcome {
        records,
        summary,
        summary_path,
    })
}

/// Statistics table with the published reference row underneath.
pub fn summary_table(name: &str, summary: &CorpusSummary) -> String {
    format!(
        "{}\n{}\n{}\n",
        CorpusSummary::table_header(),
        summary.table_row(name),
        CorpusSummary::reference_corpus().table_row("reference")
    )
}

pub fn corpus_name(dir: &Path) -> String {
    dir.file_name()
        .map_or_else(|| "corpus".to_string(), |n| n.to_string_lossy().into_owned())
}
