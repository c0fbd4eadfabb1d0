use libm::erf;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Result};
use crate::tensor::Matrix;

const INV_SQRT_2: f64 = std::f64::consts::FRAC_1_SQRT_2;
const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Exact Gaussian-error linear unit, `x * Phi(x)`.
pub fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + erf(x * INV_SQRT_2))
}

/// `d/dx gelu(x) = Phi(x) + x * phi(x)`.
pub fn gelu_derivative(x: f64) -> f64 {
    0.5 * (1.0 + erf(x * INV_SQRT_2)) + x * INV_SQRT_2PI * (-0.5 * x * x).exp()
}

/// Two-layer feed-forward expert: `W2^T gelu(W1^T x + b1) + b2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Expert {
    /// `C x rC`
    pub w1: Matrix,
    pub b1: Vec<f64>,
    /// `rC x C`
    pub w2: Matrix,
    pub b2: Vec<f64>,
}

/// Intermediate values of one expert evaluation, kept for backpropagation.
#[derive(Debug, Clone)]
pub(crate) struct ExpertTrace {
    pub pre: Vec<f64>,
    pub act: Vec<f64>,
    pub out: Vec<f64>,
}

impl Expert {
    pub fn zeros(channels: usize, ratio: usize) -> Self {
        let hidden = channels * ratio;
        Self {
            w1: Matrix::zeros(channels, hidden),
            b1: vec![0.0; hidden],
            w2: Matrix::zeros(hidden, channels),
            b2: vec![0.0; channels],
        }
    }

    /// He-style normal initialisation with small random biases.
    pub fn random(channels: usize, ratio: usize, rng: &mut impl Rng) -> Self {
        let hidden = channels * ratio;
        let bias = |n: usize, rng: &mut dyn rand::RngCore| -> Vec<f64> {
            (0..n).map(|_| rng.random_range(-0.1..0.1)).collect()
        };
        Self {
            w1: Matrix::random_normal(channels, hidden, (2.0 / channels as f64).sqrt(), rng),
            b1: bias(hidden, rng),
            w2: Matrix::random_normal(hidden, channels, (1.0 / hidden as f64).sqrt(), rng),
            b2: bias(channels, rng),
        }
    }

    pub fn channels(&self) -> usize {
        self.w1.rows
    }

    pub fn hidden(&self) -> usize {
        self.w1.cols
    }

    pub fn validate(&self) -> Result<()> {
        let (c, h) = (self.w1.rows, self.w1.cols);
        self.w1.check_shape("expert W1", c, h)?;
        check_len("expert b1", self.b1.len(), h)?;
        self.w2.check_shape("expert W2", h, c)?;
        check_len("expert b2", self.b2.len(), c)
    }

    pub(crate) fn trace(&self, x: &[f64]) -> ExpertTrace {
        let mut pre = self.w1.t_mul_vec(x);
        for (p, b) in pre.iter_mut().zip(&self.b1) {
            *p += b;
        }
        let act: Vec<f64> = pre.iter().map(|&p| gelu(p)).collect();
        let mut out = self.w2.t_mul_vec(&act);
        for (o, b) in out.iter_mut().zip(&self.b2) {
            *o += b;
        }
        ExpertTrace { pre, act, out }
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        self.trace(x).out
    }
}

/// One expert applied to one channel vector.
pub fn expert_forward(expert: &Expert, x: &[f64]) -> Result<Vec<f64>> {
    check_len("expert input", x.len(), expert.channels())?;
    Ok(expert.forward(x))
}

/// Weighted sum of expert outputs.
pub fn moe_combine(weights: &[f64], outputs: &[Vec<f64>]) -> Result<Vec<f64>> {
    check_len("expert outputs", outputs.len(), weights.len())?;
    let c = outputs.first().map_or(0, Vec::len);
    let mut y = vec![0.0; c];
    for (&w, out) in weights.iter().zip(outputs) {
        check_len("expert output", out.len(), c)?;
        if w != 0.0 {
            for (acc, v) in y.iter_mut().zip(out) {
                *acc += w * v;
            }
        }
    }
    Ok(y)
}
