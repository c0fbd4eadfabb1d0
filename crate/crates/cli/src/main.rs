use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};
use hqc_cli::commands::{analyze, curate, degrade, eval, moe, split};
use hqc_damoe::GradCheckConfig;

#[derive(Parser)]
#[command(
    name = "hqc",
    version,
    about = "Analyse, curate and degrade image restoration corpora"
)]
struct Cli {
    /// Worker threads for per-image stages.
    #[arg(long, global = true, default_value_t = default_workers(), value_parser = clap::value_parser!(u64).range(1..))]
    workers: u64,
    /// Run seed; every random choice is derived from it.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[command(subcommand)]
    command: Command,
}

fn default_workers() -> u64 {
    std::thread::available_parallelism().map_or(1, |n| n.get() as u64)
}

#[derive(Subcommand)]
enum Command {
    /// Measure every image in a directory and write a JSONL manifest.
    Analyze {
        dir: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// JSONL or CSV rows of id, broad_class, sub_category.
        #[arg(long)]
        labels: Option<PathBuf>,
        /// Downscale the luma plane so its longest side is at most this before the FFT.
        #[arg(long)]
        max_side: Option<usize>,
    },
    /// Filter and balance a manifest.
    Curate {
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// JSON curation policy; defaults apply when omitted.
        #[arg(long)]
        policy: Option<PathBuf>,
    },
    /// Synthesise degraded/clean training pairs.
    Degrade(DegradeArgs),
    /// Score restored images against references.
    Eval {
        restored: PathBuf,
        reference: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Manifest providing categories and hf ratios for grouping.
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[arg(long, value_enum)]
        group_by: Option<eval::GroupBy>,
        #[arg(long)]
        threshold: Option<f64>,
        /// Border pixels ignored on each side.
        #[arg(long, default_value_t = 0)]
        crop: usize,
    },
    /// Split a selection into train and per-category test sets.
    SplitBench {
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// JSON map of sub-category to test count.
        #[arg(long)]
        quotas: Option<PathBuf>,
    },
    /// Partition a manifest into low and high frequency bands.
    FreqSplit {
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        threshold: f64,
    },
    /// Run the reference mixture-of-experts forward pass.
    Moe(MoeArgs),
}

#[derive(Args)]
struct DegradeArgs {
    manifest: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Setting such as sr:2, derain, denoise:25 or dejpeg:40; repeatable. All eleven standard settings when omitted.
    #[arg(long = "spec", value_parser = degrade::parse_spec)]
    specs: Vec<hqc_core::degrade::Degradation>,
    /// Enable the extended degradation chain.
    #[arg(long)]
    extended: bool,
}

#[derive(Args)]
struct MoeArgs {
    /// Model configuration JSON; a small default model otherwise.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Saved parameters; overrides --config.
    #[arg(long)]
    params: Option<PathBuf>,
    /// Input feature tensor JSON; seeded Gaussian otherwise.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Task names or indices.
    #[arg(long = "task", default_values_t = vec!["sr".to_string()])]
    tasks: Vec<String>,
    #[arg(long)]
    grad_check: bool,
    /// Write the task-by-expert routing counts as CSV.
    #[arg(long)]
    histogram: Option<PathBuf>,
    #[arg(long)]
    save_params: Option<PathBuf>,
}

fn report_failures(failures: &[(String, String)]) -> ExitCode {
    if failures.is_empty() {
        return ExitCode::SUCCESS;
    }
    for (id, reason) in failures {
        eprintln!("failed: {id}: {reason}");
    }
    eprintln!("{} item(s) failed", failures.len());
    ExitCode::from(2)
}

fn run(cli: Cli) -> Result<ExitCode> {
    let workers = cli.workers as usize;
    match cli.command {
        Command::Analyze {
            dir,
            out,
            labels,
            max_side,
        } => {
            let outcome = analyze::run(&analyze::AnalyzeOptions {
                dir: dir.clone(),
                labels,
                out,
                workers,
                max_side,
            })?;
            print!(
                "{}",
                analyze::summary_table(&analyze::corpus_name(&dir), &outcome.summary)
            );
            let failures: Vec<_> = outcome
                .failures()
                .into_iter()
                .map(|(a, b)| (a.to_string(), b.to_string()))
                .collect();
            Ok(report_failures(&failures))
        }
        Command::Curate { manifest, out, policy } => {
            let (outcome, _) = curate::run(&curate::CurateOptions {
                manifest,
                policy,
                out,
                seed: cli.seed,
            })?;
            print!("{}", curate::report_text(&outcome.report()));
            Ok(ExitCode::SUCCESS)
        }
        Command::Degrade(args) => {
            let outcome = degrade::run(&degrade::DegradeOptions {
                manifest: args.manifest,
                specs: args.specs,
                out: args.out,
                seed: cli.seed,
                workers,
                extended: args.extended,
            })?;
            println!(
                "{} pairs written to {}",
                outcome.pairs.len(),
                outcome.manifest.display()
            );
            Ok(report_failures(&outcome.failures))
        }
        Command::Eval {
            restored,
            reference,
            out,
            manifest,
            group_by,
            threshold,
            crop,
        } => {
            let outcome = eval::run(&eval::EvalOptions {
                restored,
                reference,
                manifest,
                group_by,
                threshold,
                crop,
                out,
                workers,
            })?;
            print!("{}", eval::summary_text(&outcome.summary));
            Ok(report_failures(&outcome.failures))
        }
        Command::SplitBench { manifest, out, quotas } => {
            let s = split::run_split_bench(&manifest, quotas.as_ref(), &out, cli.seed)?;
            println!("train {}  test {}", s.train.len(), s.test.len());
            Ok(ExitCode::SUCCESS)
        }
        Command::FreqSplit {
            manifest,
            out,
            threshold,
        } => {
            let s = split::run_freq_split(&manifest, threshold, &out)?;
            println!("low {}  high {}", s.low.len(), s.high.len());
            Ok(ExitCode::SUCCESS)
        }
        Command::Moe(args) => {
            let outcome = moe::run(&moe::MoeOptions {
                config: args.config,
                params: args.params,
                input: args.input,
                tasks: args.tasks,
                seed: cli.seed,
                grad_check: args.grad_check,
                histogram: args.histogram,
                save_params: args.save_params,
            })?;
            for (task, sum) in &outcome.checksums {
                println!("{task}\t{sum}");
            }
            print!("{}", outcome.histogram.to_csv());
            match outcome.grad_check {
                Some(Ok(report)) => {
                    print!(
                        "{}",
                        moe::grad_report_text(&report, GradCheckConfig::default().tolerance)
                    );
                    if !report.passed {
                        return Ok(ExitCode::FAILURE);
                    }
                }
                Some(Err(reason)) => {
                    eprintln!("grad-check refused: {reason}");
                    return Ok(ExitCode::FAILURE);
                }
                None => {}
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("HQC_LOG", "warn")).init();
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
