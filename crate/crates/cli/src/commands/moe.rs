use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use hqc_damoe::model::MoeLayer;
use hqc_damoe::{
    model_forward, moe_inputs, smoe_grad_check, GradCheckConfig, GradCheckReport, Loss, Model, ModelConfig,
    RoutingHistogram, TaskId, Tensor,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::util::{derive_seed, sha256_hex, write_text};

#[derive(Debug, Clone, Default)]
pub struct MoeOptions {
    pub config: Option<PathBuf>,
    pub params: Option<PathBuf>,
    pub input: Option<PathBuf>,
    pub tasks: Vec<String>,
    pub seed: u64,
    pub grad_check: bool,
    pub histogram: Option<PathBuf>,
    pub save_params: Option<PathBuf>,
}

#[derive(Debug, Clone)]
pub struct MoeOutcome {
    pub checksums: Vec<(TaskId, String)>,
    pub histogram: RoutingHistogram,
    /// `Err` holds the reason a check was refused.
    pub grad_check: Option<std::result::Result<GradCheckReport, String>>,
}

fn load_model(opts: &MoeOptions) -> Result<Model> {
    if let Some(p) = &opts.params {
        return Model::load(p).with_context(|| format!("loading parameters {}", p.display()));
    }
    let config = match &opts.config {
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            serde_json::from_str::<ModelConfig>(&text).with_context(|| format!("parsing config {}", p.display()))?
        }
        None => ModelConfig::default(),
    };
    Ok(Model::random(config, derive_seed(opts.seed, &["params"]))?)
}

fn load_input(opts: &MoeOptions, config: &ModelConfig) -> Result<Tensor> {
    match &opts.input {
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            Ok(serde_json::from_str(&text).with_context(|| format!("parsing tensor {}", p.display()))?)
        }
        None => {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(opts.seed, &["input"]));
            Ok(Tensor::random_normal(
                vec![config.channels, config.height, config.width],
                1.0,
                &mut rng,
            )?)
        }
    }
}

/// Runs the forward pass per task; optionally checks S-MoE gradients.
pub fn run(opts: &MoeOptions) -> Result<MoeOutcome> {
    let model = load_model(opts)?;
    let features = load_input(opts, &model.config)?;
    let names: Vec<String> = if opts.tasks.is_empty() {
        vec!["sr".into()]
    } else {
        opts.tasks.clone()
    };
    let tasks: Vec<TaskId> = names
        .iter()
        .map(|n| TaskId::from_name(n).or_else(|_| TaskId::new(n.parse().unwrap_or(usize::MAX), model.config.tasks)))
        .collect::<std::result::Result<_, _>>()?;

    let mut histogram = RoutingHistogram::new(model.config.tasks, model.config.experts);
    let mut checksums = Vec::new();
    for &task in &tasks {
        let (out, hist) = model_forward(&model, task, &features)?;
        histogram.merge(&hist)?;
        checksums.push((task, sha256_hex(&out.to_le_bytes())));
    }

    let grad_check = if opts.grad_check {
        let Some(idx) = model.blocks.iter().position(|b| matches!(b.moe, MoeLayer::Smoe(_))) else {
            bail!("the model has no S-MoE block to check");
        };
        let MoeLayer::Smoe(layer) = &model.blocks[idx].moe else {
            unreachable!()
        };
        let inputs = moe_inputs(&model, tasks[0], &features)?;
        Some(
            match smoe_grad_check(layer, &inputs[idx], &Loss::HalfSquared, GradCheckConfig::default()) {
                Ok(r) => Ok(r),
                Err(e @ hqc_damoe::Error::RoutingTie { .. }) => Err(e.to_string()),
                Err(e) => return Err(e.into()),
            },
        )
    } else {
        None
    };

    if let Some(p) = &opts.histogram {
        write_text(p, &histogram.to_csv())?;
    }
    if let Some(p) = &opts.save_params {
        write_text(p, &model.to_json()?)?;
    }
    Ok(MoeOutcome {
        checksums,
        histogram,
        grad_check,
    })
}

pub fn grad_report_text(report: &GradCheckReport, tolerance: f64) -> String {
    let mut out = String::from("parameter   count   rel.error   max.abs.error\n");
    for g in &report.groups {
        let verdict = if g.relative_error < tolerance { "ok" } else { "FAIL" };
        out.push_str(&format!(
            "{:<8} {:>8} {:>11.3e} {:>15.3e}  {verdict}\n",
            g.name, g.parameters, g.relative_error, g.max_abs_error
        ));
    }
    out.push_str(&format!(
        "grad-check {}: max relative error {:.3e} (tolerance {tolerance:e})\n",
        if report.passed { "passed" } else { "FAILED" },
        report.max_relative_error
    ));
    out
}
