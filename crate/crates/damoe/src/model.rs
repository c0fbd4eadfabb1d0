//! Alternating H-MoE / S-MoE blocks over a task-embedded feature map.

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::embedding::{add_task_embedding, TaskEmbedding, TaskId};
use crate::error::{check_len, Error, Result};
use crate::expert::Expert;
use crate::layers::{hmoe_forward, smoe_forward, HMoELayer, SMoELayer};
use crate::mixer::{Mixer, WindowAttention};
use crate::routing::RoutingHistogram;
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BlockKind {
    Hmoe,
    Smoe,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MixerKind {
    Identity,
    WindowAttention,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub depth: usize,
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub tasks: usize,
    pub experts: usize,
    pub top_k: usize,
    pub patch_size: usize,
    pub expansion: usize,
    pub renormalize: bool,
    pub mixer: MixerKind,
    pub window: usize,
    /// Explicit block order; alternates H-MoE and S-MoE when absent.
    pub pattern: Option<Vec<BlockKind>>,
}

impl Default for ModelConfig {
    /// Desk-scale toy configuration.
    fn default() -> Self {
        Self {
            depth: 4,
            channels: 16,
            height: 14,
            width: 14,
            tasks: 4,
            experts: 16,
            top_k: 1,
            patch_size: 7,
            expansion: 2,
            renormalize: false,
            mixer: MixerKind::Identity,
            window: 7,
            pattern: None,
        }
    }
}

impl ModelConfig {
    /// Full-size constants: 6 blocks, 180 channels, 84x84 inputs, window 7.
    pub fn full_scale() -> Self {
        Self {
            depth: 6,
            channels: 180,
            height: 84,
            width: 84,
            mixer: MixerKind::WindowAttention,
            ..Self::default()
        }
    }

    pub fn blocks(&self) -> Result<Vec<BlockKind>> {
        match &self.pattern {
            Some(p) if p.len() != self.depth => Err(Error::Config(format!(
                "block pattern has {} entries for depth {}",
                p.len(),
                self.depth
            ))),
            Some(p) => Ok(p.clone()),
            None => Ok((0..self.depth)
                .map(|i| if i % 2 == 0 { BlockKind::Hmoe } else { BlockKind::Smoe })
                .collect()),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.blocks()?;
        let positive = [
            ("channels", self.channels),
            ("height", self.height),
            ("width", self.width),
            ("tasks", self.tasks),
            ("experts", self.experts),
            ("patch_size", self.patch_size),
            ("expansion", self.expansion),
            ("window", self.window),
        ];
        if let Some((name, _)) = positive.iter().find(|(_, v)| *v == 0) {
            return Err(Error::Config(format!("{name} must be positive")));
        }
        if self.top_k == 0 || self.top_k > self.experts {
            return Err(Error::Config(format!(
                "top_k {} with {} experts",
                self.top_k, self.experts
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum MoeLayer {
    Hmoe(HMoELayer),
    Smoe(SMoELayer),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Block {
    pub mixer: Mixer,
    pub moe: MoeLayer,
}

/// Configuration plus every parameter, serialisable as JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Model {
    pub config: ModelConfig,
    pub embedding: TaskEmbedding,
    pub blocks: Vec<Block>,
}

impl Model {
    /// Seeded random initialisation.
    pub fn random(config: ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let c = config.channels;
        let embedding = TaskEmbedding::random(config.tasks, c, 1.0, &mut rng);
        let mut blocks = Vec::new();
        for kind in config.blocks()? {
            let mixer = match config.mixer {
                MixerKind::Identity => Mixer::Identity,
                MixerKind::WindowAttention => {
                    Mixer::WindowAttention(WindowAttention::random(c, config.window, &mut rng))
                }
            };
            let moe = match kind {
                BlockKind::Hmoe => MoeLayer::Hmoe(HMoELayer::random(config.tasks, c, config.expansion, &mut rng)),
                BlockKind::Smoe => {
                    let mut layer = SMoELayer::random(
                        config.experts,
                        c,
                        config.expansion,
                        config.top_k,
                        config.patch_size,
                        &mut rng,
                    )?;
                    layer.gating.renormalize = config.renormalize;
                    MoeLayer::Smoe(layer)
                }
            };
            blocks.push(Block { mixer, moe });
        }
        Ok(Self {
            config,
            embedding,
            blocks,
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.config.validate()?;
        let c = self.config.channels;
        check_len("task embedding channels", self.embedding.channels(), c)?;
        check_len("task embedding rows", self.embedding.tasks(), self.config.tasks)?;
        let kinds = self.config.blocks()?;
        check_len("blocks", self.blocks.len(), kinds.len())?;
        for (block, kind) in self.blocks.iter().zip(kinds) {
            block.mixer.validate(c)?;
            match (&block.moe, kind) {
                (MoeLayer::Hmoe(l), BlockKind::Hmoe) => {
                    l.validate(c)?;
                    check_len("H-MoE experts", l.experts.len(), self.config.tasks)?;
                }
                (MoeLayer::Smoe(l), BlockKind::Smoe) => l.validate(c)?,
                _ => {
                    return Err(Error::Config(
                        "block layer does not match the configured pattern".into(),
                    ))
                }
            }
        }
        Ok(())
    }

    /// Zeroes every expert weight and bias, leaving gates and mixers intact.
    pub fn zero_experts(&mut self) {
        let zero = |e: &mut Expert| *e = Expert::zeros(e.channels(), e.hidden() / e.channels().max(1));
        for block in &mut self.blocks {
            match &mut block.moe {
                MoeLayer::Hmoe(l) => l.experts.iter_mut().for_each(zero),
                MoeLayer::Smoe(l) => l.experts.iter_mut().for_each(zero),
            }
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let model: Model = serde_json::from_str(text)?;
        model.validate()?;
        Ok(model)
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

/// Task embedding once, then `[mixer -> MoE -> residual]` per block.
/// The histogram counts top-1 selections of every S-MoE patch.
pub fn model_forward(model: &Model, task: TaskId, features: &Tensor) -> Result<(Tensor, RoutingHistogram)> {
    let (c, _, _) = features.chw()?;
    check_len("input channels", c, model.config.channels)?;
    let mut hist = RoutingHistogram::new(model.config.tasks, model.config.experts);
    let mut x = add_task_embedding(features, &model.embedding, task)?;
    for block in &model.blocks {
        let mixed = block.mixer.forward(&x)?;
        let update = match &block.moe {
            MoeLayer::Hmoe(l) => hmoe_forward(l, task, &mixed)?,
            MoeLayer::Smoe(l) => {
                let out = smoe_forward(l, &mixed)?;
                hist.record(task, &out.top1);
                out.output
            }
        };
        x = mixed.add(&update)?;
    }
    Ok((x, hist))
}

/// Input seen by each block's MoE layer during a forward pass.
pub fn moe_inputs(model: &Model, task: TaskId, features: &Tensor) -> Result<Vec<Tensor>> {
    let mut x = add_task_embedding(features, &model.embedding, task)?;
    let mut inputs = Vec::with_capacity(model.blocks.len());
    for block in &model.blocks {
        let mixed = block.mixer.forward(&x)?;
        let update = match &block.moe {
            MoeLayer::Hmoe(l) => hmoe_forward(l, task, &mixed)?,
            MoeLayer::Smoe(l) => smoe_forward(l, &mixed)?.output,
        };
        x = mixed.add(&update)?;
        inputs.push(mixed);
    }
    Ok(inputs)
}
