//! Token mixers placed in front of each MoE layer.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::gating::softmax;
use crate::layers::patch_grid;
use crate::tensor::{Matrix, Tensor};

/// Single-head self-attention inside non-overlapping square windows, with
/// a residual connection: `x + W_o^T attn(x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowAttention {
    pub window: usize,
    pub wq: Matrix,
    pub wk: Matrix,
    pub wv: Matrix,
    pub wo: Matrix,
}

impl WindowAttention {
    pub fn random(channels: usize, window: usize, rng: &mut impl Rng) -> Self {
        let std = 1.0 / (channels as f64).sqrt();
        Self {
            window,
            wq: Matrix::random_normal(channels, channels, std, rng),
            wk: Matrix::random_normal(channels, channels, std, rng),
            wv: Matrix::random_normal(channels, channels, std, rng),
            wo: Matrix::random_normal(channels, channels, std, rng),
        }
    }

    pub fn validate(&self, channels: usize) -> Result<()> {
        if self.window == 0 {
            return Err(Error::Config("attention window must be positive".into()));
        }
        for (name, m) in [
            ("W_q", &self.wq),
            ("W_k", &self.wk),
            ("W_v", &self.wv),
            ("W_o", &self.wo),
        ] {
            m.check_shape(name, channels, channels)?;
        }
        Ok(())
    }

    pub fn forward(&self, features: &Tensor) -> Result<Tensor> {
        let (c, h, w) = features.chw()?;
        check_len("attention channels", c, self.wq.rows)?;
        let scale = 1.0 / (c as f64).sqrt();
        let mut out = features.clone();
        for win in patch_grid(h, w, self.window) {
            let positions: Vec<(usize, usize)> = win.positions().collect();
            let tokens: Vec<Vec<f64>> = positions.iter().map(|&(y, x)| features.column(y, x)).collect();
            let q: Vec<Vec<f64>> = tokens.iter().map(|t| self.wq.t_mul_vec(t)).collect();
            let k: Vec<Vec<f64>> = tokens.iter().map(|t| self.wk.t_mul_vec(t)).collect();
            let v: Vec<Vec<f64>> = tokens.iter().map(|t| self.wv.t_mul_vec(t)).collect();
            for (i, &(y, x)) in positions.iter().enumerate() {
                let scores: Vec<f64> = k
                    .iter()
                    .map(|kj| scale * q[i].iter().zip(kj).map(|(a, b)| a * b).sum::<f64>())
                    .collect();
                let attn = softmax(&scores);
                let mut mixed = vec![0.0; c];
                for (a, vj) in attn.iter().zip(&v) {
                    for (m, val) in mixed.iter_mut().zip(vj) {
                        *m += a * val;
                    }
                }
                let proj = self.wo.t_mul_vec(&mixed);
                let col: Vec<f64> = tokens[i].iter().zip(&proj).map(|(t, p)| t + p).collect();
                out.set_column(y, x, &col);
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Mixer {
    Identity,
    WindowAttention(WindowAttention),
}

impl Mixer {
    pub fn forward(&self, features: &Tensor) -> Result<Tensor> {
        match self {
            Mixer::Identity => Ok(features.clone()),
            Mixer::WindowAttention(a) => a.forward(features),
        }
    }

    pub fn validate(&self, channels: usize) -> Result<()> {
        match self {
            Mixer::Identity => Ok(()),
            Mixer::WindowAttention(a) => a.validate(channels),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn single_token_windows_reduce_to_projection() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = WindowAttention {
            window: 1,
            ..WindowAttention::random(3, 1, &mut rng)
        };
        let x = Tensor::random_normal(vec![3, 4, 4], 1.0, &mut rng).unwrap();
        let y = a.forward(&x).unwrap();
        for yy in 0..4 {
            for xx in 0..4 {
                let t = x.column(yy, xx);
                let want: Vec<f64> = t
                    .iter()
                    .zip(a.wo.t_mul_vec(&a.wv.t_mul_vec(&t)))
                    .map(|(a, b)| a + b)
                    .collect();
                assert!(y.column(yy, xx).iter().zip(&want).all(|(p, q)| (p - q).abs() < 1e-12));
            }
        }
    }

    #[test]
    fn zero_projection_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let a = WindowAttention {
            wo: Matrix::zeros(4, 4),
            ..WindowAttention::random(4, 7, &mut rng)
        };
        let x = Tensor::random_normal(vec![4, 14, 14], 1.0, &mut rng).unwrap();
        assert_eq!(Mixer::WindowAttention(a).forward(&x).unwrap(), x);
    }

    #[test]
    fn windows_do_not_interact() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let a = WindowAttention::random(2, 7, &mut rng);
        let x = Tensor::random_normal(vec![2, 14, 14], 1.0, &mut rng).unwrap();
        let mut x2 = x.clone();
        x2.set_column(13, 13, &[5.0, -5.0]);
        let (y, y2) = (a.forward(&x).unwrap(), a.forward(&x2).unwrap());
        for yy in 0..7 {
            for xx in 0..14 {
                assert_eq!(y.column(yy, xx), y2.column(yy, xx));
            }
        }
    }
}
