use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::tensor::Matrix;

/// Linear router `softmax(W_g x)` followed by top-k masking.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GatingNetwork {
    /// `n x C`
    pub w_g: Matrix,
    pub k: usize,
    /// Rescale the surviving weights to sum to one. Off by default.
    #[serde(default)]
    pub renormalize: bool,
}

/// Full routing decision for one input.
#[derive(Debug, Clone, PartialEq)]
pub struct GateDecision {
    pub softmax: Vec<f64>,
    /// Selected expert indices, best first.
    pub selected: Vec<usize>,
    /// Softmax entries outside `selected` set to zero.
    pub weights: Vec<f64>,
}

impl GateDecision {
    pub fn top1(&self) -> usize {
        self.selected[0]
    }
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&l| (l - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Indices of the `k` largest values, best first; ties go to the lower index.
pub fn top_k(values: &[f64], k: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    order.truncate(k);
    order
}

impl GatingNetwork {
    pub fn new(w_g: Matrix, k: usize) -> Result<Self> {
        let g = Self {
            w_g,
            k,
            renormalize: false,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn random(experts: usize, channels: usize, k: usize, rng: &mut impl Rng) -> Result<Self> {
        Self::new(
            Matrix::random_normal(experts, channels, 1.0 / (channels as f64).sqrt(), rng),
            k,
        )
    }

    pub fn experts(&self) -> usize {
        self.w_g.rows
    }

    pub fn channels(&self) -> usize {
        self.w_g.cols
    }

    pub fn validate(&self) -> Result<()> {
        self.w_g.check_shape("gate W_g", self.w_g.rows, self.w_g.cols)?;
        if self.k == 0 || self.k > self.experts() {
            return Err(Error::Config(format!(
                "top-k {} with {} experts",
                self.k,
                self.experts()
            )));
        }
        Ok(())
    }

    pub fn logits(&self, x: &[f64]) -> Vec<f64> {
        self.w_g.mul_vec(x)
    }

    pub fn decide(&self, x: &[f64]) -> Result<GateDecision> {
        check_len("gate input", x.len(), self.channels())?;
        let softmax = softmax(&self.logits(x));
        let selected = top_k(&softmax, self.k);
        let mut weights = vec![0.0; softmax.len()];
        for &i in &selected {
            weights[i] = softmax[i];
        }
        if self.renormalize {
            let kept: f64 = weights.iter().sum();
            for w in &mut weights {
                *w /= kept;
            }
        }
        Ok(GateDecision {
            softmax,
            selected,
            weights,
        })
    }
}

/// Top-k gate weights for one input vector.
pub fn gate_weights(gate: &GatingNetwork, x: &[f64]) -> Result<Vec<f64>> {
    Ok(gate.decide(x)?.weights)
}
