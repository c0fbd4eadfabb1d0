use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use hqc_core::curation::{read_manifest, write_jsonl};
use hqc_core::degrade::{make_pair, Degradation, DegradationSpec, RainParams};
use hqc_core::jpeg::ChromaSubsampling;
use hqc_core::load_image;
use log::info;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::util::{derive_seed, ensure_parent, thread_pool};

/// Parses `sr:2`, `denoise:25`, `dejpeg:40`, `derain`, or
/// `derain:density=0.02,angle=75,length=15,intensity=0.6`.
pub fn parse_spec(text: &str) -> Result<Degradation> {
    let (task, arg) = match text.split_once(':') {
        Some((t, a)) => (t.trim().to_ascii_lowercase(), Some(a.trim())),
        None => (text.trim().to_ascii_lowercase(), None),
    };
    let number = |prefix: &str| -> Result<&str> {
        let a = arg.ok_or_else(|| anyhow!("{task} needs a level, e.g. {task}:{prefix}..."))?;
        Ok(a.strip_prefix(prefix).unwrap_or(a))
    };
    Ok(match task.as_str() {
        "sr" => Degradation::Sr {
            scale: number("x")?.parse().context("SR scale")?,
        },
        "denoise" => Degradation::Denoise {
            sigma: number("sigma")?.parse().context("noise sigma")?,
        },
        "dejpeg" => Degradation::Dejpeg {
            quality: number("q")?.parse().context("JPEG quality")?,
        },
        "derain" => {
            let mut p = RainParams::default();
            for kv in arg.into_iter().flat_map(|a| a.split(',')).filter(|s| !s.is_empty()) {
                let (k, v) = kv
                    .split_once('=')
                    .ok_or_else(|| anyhow!("rain parameter {kv:?} is not key=value"))?;
                match k.trim() {
                    "density" => p.density = v.parse()?,
                    "angle" => p.angle = v.parse()?,
                    "length" => p.streak_length = v.parse()?,
                    "intensity" => p.intensity = v.parse()?,
                    other => bail!("unknown rain parameter {other:?}"),
                }
            }
            Degradation::Derain(p)
        }
        other => bail!("unknown task {other:?} (expected sr, derain, denoise or dejpeg)"),
    })
}

#[derive(Debug, Clone)]
pub struct DegradeOptions {
    pub manifest: PathBuf,
    /// Empty means the eleven standard settings.
    pub specs: Vec<Degradation>,
    pub out: PathBuf,
    pub seed: u64,
    pub workers: usize,
    pub extended: bool,
}

/// One synthesised pair, with paths relative to the output root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairRecord {
    pub id: String,
    pub task: String,
    pub level: String,
    pub degradation: Degradation,
    pub seed: u64,
    pub lq: PathBuf,
    pub hq: PathBuf,
    pub lq_width: usize,
    pub lq_height: usize,
    pub hq_width: usize,
    pub hq_height: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub chroma_subsampling: Option<ChromaSubsampling>,
}

#[derive(Debug, Clone)]
pub struct DegradeOutcome {
    pub pairs: Vec<PairRecord>,
    pub failures: Vec<(String, String)>,
    pub manifest: PathBuf,
}

fn one_pair(
    root: &Path,
    id: &str,
    source: &Path,
    degradation: Degradation,
    run_seed: u64,
    extended: bool,
) -> Result<PairRecord> {
    let task = degradation.task().to_string();
    let level = degradation.level_label();
    let seed = derive_seed(run_seed, &[id, &task, &level]);
    let spec = DegradationSpec {
        degradation,
        seed,
        extended,
    };
    let img = load_image(source)?.image;
    let pair = make_pair(&img, &spec)?;
    let dir = PathBuf::from(&task).join(&level);
    let lq = dir.join("lq").join(format!("{id}.png"));
    let hq = dir.join("hq").join(format!("{id}.png"));
    for (rel, image) in [(&lq, &pair.degraded), (&hq, &pair.target)] {
        let path = root.join(rel);
        ensure_parent(&path)?;
        image.save_png(&path)?;
    }
    Ok(PairRecord {
        id: id.to_string(),
        task,
        level,
        degradation,
        seed,
        lq,
        hq,
        lq_width: pair.degraded.width(),
        lq_height: pair.degraded.height(),
        hq_width: pair.target.width(),
        hq_height: pair.target.height(),
        chroma_subsampling: pair.subsampling,
    })
}

/// Writes `<out>/<task>/<level>/{lq,hq}/<id>.png` for every valid record
/// and setting, plus `<out>/pairs.jsonl`.
pub fn run(opts: &DegradeOptions) -> Result<DegradeOutcome> {
    let specs = if opts.specs.is_empty() {
        Degradation::standard_menu()
    } else {
        opts.specs.clone()
    };
    for d in &specs {
        DegradationSpec {
            degradation: *d,
            seed: 0,
            extended: opts.extended,
        }
        .validate()?;
    }
    let records = read_manifest(&opts.manifest).with_context(|| format!("reading {}", opts.manifest.display()))?;
    let jobs: Vec<(&str, &Path, Degradation)> = records
        .iter()
        .filter(|r| r.is_valid())
        .flat_map(|r| specs.iter().map(move |d| (r.id.as_str(), r.path.as_path(), *d)))
        .collect();
    info!("synthesising {} pairs with {} workers", jobs.len(), opts.workers);

    let pool = thread_pool(opts.workers)?;
    let results: Vec<(String, Result<PairRecord>)> = pool.install(|| {
        jobs.par_iter()
            .map(|&(id, path, d)| {
                (
                    format!("{id} {d}"),
                    one_pair(&opts.out, id, path, d, opts.seed, opts.extended),
                )
            })
            .collect()
    });
    let mut pairs = Vec::new();
    let mut failures = Vec::new();
    for (job, r) in results {
        match r {
            Ok(p) => pairs.push(p),
            Err(e) => failures.push((job, format!("{e:#}"))),
        }
    }
    pairs.sort_by(|a, b| a.lq.cmp(&b.lq));
    let manifest = opts.out.join("pairs.jsonl");
    write_jsonl(&manifest, &pairs)?;
    Ok(DegradeOutcome {
        pairs,
        failures,
        manifest,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spec_syntax() {
        assert_eq!(parse_spec("sr:2").unwrap(), Degradation::Sr { scale: 2 });
        assert_eq!(parse_spec("SR:x4").unwrap(), Degradation::Sr { scale: 4 });
        assert_eq!(
            parse_spec("denoise:sigma25").unwrap(),
            Degradation::Denoise { sigma: 25.0 }
        );
        assert_eq!(parse_spec("dejpeg:q10").unwrap(), Degradation::Dejpeg { quality: 10 });
        assert_eq!(
            parse_spec("derain").unwrap(),
            Degradation::Derain(RainParams::default())
        );
        let Degradation::Derain(p) = parse_spec("derain:angle=60,length=9").unwrap() else {
            panic!("not rain");
        };
        assert_eq!((p.angle, p.streak_length), (60.0, 9));
        assert!(parse_spec("deblur:3").is_err());
        assert!(parse_spec("sr").is_err());
        assert!(parse_spec("derain:wind=3").is_err());
    }
}
