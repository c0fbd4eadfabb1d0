use std::path::PathBuf;

use anyhow::{Context, Result};
use hqc_core::curation::{
    curate, read_manifest, write_jsonl, CurationOutcome, CurationPolicy, CurationReport, Rejection,
};
use serde::Serialize;

use crate::util::{sibling, write_json};

#[derive(Debug, Clone)]
pub struct CurateOptions {
    pub manifest: PathBuf,
    pub policy: Option<PathBuf>,
    pub out: PathBuf,
    pub seed: u64,
}

#[derive(Debug, Serialize)]
struct RejectionReport<'a> {
    #[serde(flatten)]
    report: &'a CurationReport,
    rejected: &'a [Rejection],
}

pub fn load_policy(path: Option<&PathBuf>) -> Result<CurationPolicy> {
    match path {
        Some(p) => CurationPolicy::load(p).with_context(|| format!("loading policy {}", p.display())),
        None => Ok(CurationPolicy::default()),
    }
}

/// Filters and balances a manifest; writes the selection and a rejection report.
pub fn run(opts: &CurateOptions) -> Result<(CurationOutcome, PathBuf)> {
    let policy = load_policy(opts.policy.as_ref())?;
    let records = read_manifest(&opts.manifest).with_context(|| format!("reading {}", opts.manifest.display()))?;
    let outcome = curate(records, &policy, opts.seed)?;
    write_jsonl(&opts.out, &outcome.selected)?;
    let report_path = sibling(&opts.out, "rejections.json");
    let report = outcome.report();
    write_json(
        &report_path,
        &RejectionReport {
            report: &report,
            rejected: &outcome.rejected,
        },
    )?;
    Ok((outcome, report_path))
}

pub fn report_text(report: &CurationReport) -> String {
    let mut out = format!(
        "input {}  passed filters {}  selected {}  acceptance {:.2}%\n",
        report.input,
        report.passed_filters,
        report.selected,
        report.acceptance_rate * 100.0
    );
    for (reason, count) in &report.rejections {
        let share = if report.input == 0 {
            0.0
        } else {
            *count as f64 / report.input as f64 * 100.0
        };
        out.push_str(&format!("  rejected {reason:<12} {count:>8} ({share:.1}%)\n"));
    }
    out
}
