//! Numeric reference for degradation-aware mixture-of-experts layers:
//! top-k softmax gating, task-routed and patch-routed expert layers, task
//! embeddings, an alternating-block forward pass, routing statistics, and
//! gradient checks.

pub mod embedding;
pub mod error;
pub mod expert;
pub mod gating;
pub mod grad;
pub mod layers;
pub mod mixer;
pub mod model;
pub mod routing;
pub mod tensor;

pub use embedding::{add_task_embedding, TaskEmbedding, TaskId, DEFAULT_TASKS};
pub use error::{Error, Result};
pub use expert::{expert_forward, moe_combine, Expert};
pub use gating::{gate_weights, softmax, top_k, GateDecision, GatingNetwork};
pub use grad::{smoe_grad_check, smoe_gradients, GradCheckConfig, GradCheckReport, Loss};
pub use layers::{hmoe_forward, patch_grid, smoe_forward, HMoELayer, SMoELayer, SMoEOutput};
pub use mixer::{Mixer, WindowAttention};
pub use model::{model_forward, moe_inputs, BlockKind, MixerKind, Model, ModelConfig};
pub use routing::RoutingHistogram;
pub use tensor::{Matrix, Tensor};
