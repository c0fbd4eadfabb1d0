//! Hard (task-routed) and soft (patch-routed) mixture-of-experts layers.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::embedding::TaskId;
use crate::error::{check_len, Error, Result};
use crate::expert::{Expert, ExpertTrace};
use crate::gating::{GateDecision, GatingNetwork};
use crate::tensor::Tensor;

/// One expert per task; the task id picks the expert for every position.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HMoELayer {
    pub experts: Vec<Expert>,
}

impl HMoELayer {
    pub fn random(tasks: usize, channels: usize, ratio: usize, rng: &mut impl Rng) -> Self {
        Self {
            experts: (0..tasks).map(|_| Expert::random(channels, ratio, rng)).collect(),
        }
    }

    pub fn validate(&self, channels: usize) -> Result<()> {
        if self.experts.is_empty() {
            return Err(Error::Config("H-MoE layer without experts".into()));
        }
        for e in &self.experts {
            e.validate()?;
            check_len("H-MoE expert channels", e.channels(), channels)?;
        }
        Ok(())
    }
}

/// Applies the task's expert to every channel vector of a `C x H x W` map.
pub fn hmoe_forward(layer: &HMoELayer, task: TaskId, features: &Tensor) -> Result<Tensor> {
    let (c, h, w) = features.chw()?;
    let expert = layer.experts.get(task.index()).ok_or(Error::Task {
        task: task.index(),
        tasks: layer.experts.len(),
    })?;
    check_len("H-MoE input channels", c, expert.channels())?;
    let mut out = features.clone();
    for y in 0..h {
        for x in 0..w {
            out.set_column(y, x, &expert.forward(&features.column(y, x)));
        }
    }
    Ok(out)
}

/// Non-overlapping `P x P` region; edge patches are cropped to the map.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Patch {
    pub y0: usize,
    pub x0: usize,
    pub height: usize,
    pub width: usize,
}

impl Patch {
    pub fn positions(self) -> impl Iterator<Item = (usize, usize)> {
        (self.y0..self.y0 + self.height).flat_map(move |y| (self.x0..self.x0 + self.width).map(move |x| (y, x)))
    }
}

/// Row-major patch grid; `ceil(H/P) * ceil(W/P)` patches.
pub fn patch_grid(height: usize, width: usize, p: usize) -> Vec<Patch> {
    let mut out = Vec::new();
    for y0 in (0..height).step_by(p) {
        for x0 in (0..width).step_by(p) {
            out.push(Patch {
                y0,
                x0,
                height: p.min(height - y0),
                width: p.min(width - x0),
            });
        }
    }
    out
}

/// Gated experts shared across tasks, routed per patch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SMoELayer {
    pub gating: GatingNetwork,
    pub experts: Vec<Expert>,
    pub patch_size: usize,
}

impl SMoELayer {
    pub fn random(
        experts: usize,
        channels: usize,
        ratio: usize,
        k: usize,
        patch_size: usize,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        let layer = Self {
            gating: GatingNetwork::random(experts, channels, k, rng)?,
            experts: (0..experts).map(|_| Expert::random(channels, ratio, rng)).collect(),
            patch_size,
        };
        layer.validate(channels)?;
        Ok(layer)
    }

    pub fn validate(&self, channels: usize) -> Result<()> {
        self.gating.validate()?;
        check_len("S-MoE gate channels", self.gating.channels(), channels)?;
        check_len("S-MoE experts", self.experts.len(), self.gating.experts())?;
        for e in &self.experts {
            e.validate()?;
            check_len("S-MoE expert channels", e.channels(), channels)?;
        }
        if self.patch_size == 0 {
            return Err(Error::Config("patch size must be positive".into()));
        }
        Ok(())
    }
}

/// Mean channel vector of the patch's tokens.
pub fn patch_descriptor(features: &Tensor, patch: Patch) -> Vec<f64> {
    let c = features.shape()[0];
    let mut mean = vec![0.0; c];
    let mut n = 0usize;
    for (y, x) in patch.positions() {
        for (m, v) in mean.iter_mut().zip(features.column(y, x)) {
            *m += v;
        }
        n += 1;
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    mean
}

/// Per-patch routing record of an S-MoE pass.
#[derive(Debug, Clone)]
pub(crate) struct PatchRoute {
    pub patch: Patch,
    pub descriptor: Vec<f64>,
    pub decision: GateDecision,
    /// `traces[token][slot]` for the experts in `decision.selected`.
    pub traces: Vec<Vec<ExpertTrace>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SMoEOutput {
    pub output: Tensor,
    /// Top-1 expert of each patch in grid order.
    pub top1: Vec<usize>,
}

pub(crate) fn smoe_trace(layer: &SMoELayer, features: &Tensor) -> Result<(Tensor, Vec<PatchRoute>)> {
    let (c, h, w) = features.chw()?;
    check_len("S-MoE input channels", c, layer.gating.channels())?;
    let mut out = features.clone();
    let mut routes = Vec::new();
    for patch in patch_grid(h, w, layer.patch_size) {
        let descriptor = patch_descriptor(features, patch);
        let decision = layer.gating.decide(&descriptor)?;
        let mut traces = Vec::new();
        for (y, x) in patch.positions() {
            let token = features.column(y, x);
            let per_expert: Vec<ExpertTrace> = decision
                .selected
                .iter()
                .map(|&e| layer.experts[e].trace(&token))
                .collect();
            let mut y_tok = vec![0.0; c];
            for (&e, t) in decision.selected.iter().zip(&per_expert) {
                let wgt = decision.weights[e];
                for (acc, v) in y_tok.iter_mut().zip(&t.out) {
                    *acc += wgt * v;
                }
            }
            out.set_column(y, x, &y_tok);
            traces.push(per_expert);
        }
        routes.push(PatchRoute {
            patch,
            descriptor,
            decision,
            traces,
        });
    }
    Ok((out, routes))
}

/// Routes each patch by its mean token and mixes the selected experts'
/// token-wise outputs with the gate weights.
pub fn smoe_forward(layer: &SMoELayer, features: &Tensor) -> Result<SMoEOutput> {
    let (output, routes) = smoe_trace(layer, features)?;
    Ok(SMoEOutput {
        output,
        top1: routes.iter().map(|r| r.decision.top1()).collect(),
    })
}
