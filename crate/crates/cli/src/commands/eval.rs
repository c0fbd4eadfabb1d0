use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::ValueEnum;
use hqc_core::curation::{read_manifest, write_jsonl, FreqBand, ImageRecord};
use hqc_core::load_image;
use hqc_core::metrics::{evaluate_pair, inf_f64_opt, MetricAccumulator, MetricReport};
use rayon::prelude::*;
use serde::Serialize;

use crate::util::{find_image, list_images, sibling, thread_pool, write_json, write_text};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum GroupBy {
    Category,
    #[value(name = "freq_band")]
    FreqBand,
}

#[derive(Debug, Clone)]
pub struct EvalOptions {
    pub restored: PathBuf,
    pub reference: PathBuf,
    pub manifest: Option<PathBuf>,
    pub group_by: Option<GroupBy>,
    pub threshold: Option<f64>,
    pub crop: usize,
    pub out: PathBuf,
    pub workers: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupSummary {
    pub group: String,
    pub count: usize,
    #[serde(with = "inf_f64_opt")]
    pub psnr: Option<f64>,
    #[serde(with = "inf_f64_opt")]
    pub psnr_y: Option<f64>,
    pub ssim: Option<f64>,
}

impl GroupSummary {
    fn from_acc(group: &str, acc: &MetricAccumulator) -> Self {
        Self {
            group: group.to_string(),
            count: acc.count,
            psnr: acc.mean_psnr(),
            psnr_y: acc.mean_psnr_y(),
            ssim: acc.mean_ssim(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalSummary {
    pub group_by: Option<GroupBy>,
    pub threshold: Option<f64>,
    pub groups: Vec<GroupSummary>,
    pub overall: GroupSummary,
}

#[derive(Debug, Clone)]
pub struct EvalOutcome {
    pub rows: Vec<MetricReport>,
    pub summary: EvalSummary,
    pub failures: Vec<(String, String)>,
}

struct Job {
    id: String,
    reference: PathBuf,
    record: Option<ImageRecord>,
}

fn jobs(opts: &EvalOptions) -> Result<Vec<Job>> {
    match &opts.manifest {
        Some(path) => {
            let records = read_manifest(path).with_context(|| format!("reading {}", path.display()))?;
            let mut jobs = Vec::new();
            for r in records.into_iter().filter(ImageRecord::is_valid) {
                let reference =
                    find_image(&opts.reference, &r.id).unwrap_or_else(|| opts.reference.join(format!("{}.png", r.id)));
                jobs.push(Job {
                    id: r.id.clone(),
                    reference,
                    record: Some(r),
                });
            }
            Ok(jobs)
        }
        None => Ok(list_images(&opts.reference)?
            .into_iter()
            .map(|(id, reference)| Job {
                id,
                reference,
                record: None,
            })
            .collect()),
    }
}

fn fmt_db(v: Option<f64>) -> String {
    match v {
        Some(x) if x.is_infinite() => "inf".to_string(),
        Some(x) => format!("{x:.4}"),
        None => "-".to_string(),
    }
}

pub fn summary_text(summary: &EvalSummary) -> String {
    let mut out = format!(
        "{:<20} {:>7} {:>10} {:>10} {:>8}\n",
        "group", "count", "PSNR", "PSNR-Y", "SSIM"
    );
    for g in summary.groups.iter().chain(std::iter::once(&summary.overall)) {
        out.push_str(&format!(
            "{:<20} {:>7} {:>10} {:>10} {:>8}\n",
            g.group,
            g.count,
            fmt_db(g.psnr),
            fmt_db(g.psnr_y),
            g.ssim.map_or_else(|| "-".to_string(), |s| format!("{s:.4}"))
        ));
    }
    out
}

/// Scores restored images against references and summarises per group.
pub fn run(opts: &EvalOptions) -> Result<EvalOutcome> {
    match opts.group_by {
        Some(GroupBy::FreqBand) if opts.threshold.is_none() => bail!("--group-by freq_band needs --threshold"),
        Some(_) if opts.manifest.is_none() => bail!("grouping needs --manifest for categories and ratios"),
        _ => {}
    }
    let jobs = jobs(opts)?;
    let pool = thread_pool(opts.workers)?;
    let results: Vec<(String, Result<MetricReport>)> =
        pool.install(|| jobs.par_iter().map(|job| (job.id.clone(), score(opts, job))).collect());

    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for (id, r) in results {
        match r {
            Ok(row) => rows.push(row),
            Err(e) => failures.push((id, format!("{e:#}"))),
        }
    }
    rows.sort_by(|a, b| a.id.cmp(&b.id));

    let mut groups: BTreeMap<String, MetricAccumulator> = BTreeMap::new();
    let mut overall = MetricAccumulator::default();
    for row in &rows {
        overall.push(row);
        let key = match opts.group_by {
            Some(GroupBy::Category) => row.category.clone().unwrap_or_else(|| "unlabeled".into()),
            Some(GroupBy::FreqBand) => row.freq_band.clone().expect("set when grouping by band"),
            None => continue,
        };
        groups.entry(key).or_default().push(row);
    }
    let summary = EvalSummary {
        group_by: opts.group_by,
        threshold: opts.threshold,
        groups: groups.iter().map(|(k, acc)| GroupSummary::from_acc(k, acc)).collect(),
        overall: GroupSummary::from_acc("all", &overall),
    };

    write_jsonl(&opts.out, &rows)?;
    write_json(&sibling(&opts.out, "summary.json"), &summary)?;
    write_text(&sibling(&opts.out, "summary.txt"), &summary_text(&summary))?;
    Ok(EvalOutcome {
        rows,
        summary,
        failures,
    })
}

fn score(opts: &EvalOptions, job: &Job) -> Result<MetricReport> {
    let restored_path: PathBuf =
        find_image(&opts.restored, &job.id).with_context(|| format!("no restored image for {}", job.id))?;
    let restored = load_image(&restored_path)?.image;
    let reference = load_image(Path::new(&job.reference))?.image;
    let mut row = evaluate_pair(&job.id, &restored, &reference, opts.crop)?;
    if let Some(r) = &job.record {
        row.category = r.sub_category.map(|c| c.name().to_string());
        row.freq_band = opts.threshold.map(|t| FreqBand::of(r.hf_ratio, t).name().to_string());
    }
    Ok(row)
}
