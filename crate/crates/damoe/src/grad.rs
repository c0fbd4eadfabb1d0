//! Analytic S-MoE parameter gradients and a finite-difference check.
//!
//! The selected expert set of each patch is held fixed; the gradient flows
//! through the selected softmax weights and the expert MLPs.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expert::gelu_derivative;
use crate::layers::{smoe_trace, SMoELayer};
use crate::tensor::Tensor;

/// Scalar functional of a layer output.
#[derive(Debug, Clone, PartialEq)]
pub enum Loss {
    Zero,
    Sum,
    /// `0.5 * sum(y^2)`
    HalfSquared,
    /// `sum(w * y)` for a fixed tensor `w` of the output's shape.
    Weighted(Tensor),
}

impl Loss {
    pub fn value(&self, y: &Tensor) -> f64 {
        match self {
            Loss::Zero => 0.0,
            Loss::Sum => y.data().iter().sum(),
            Loss::HalfSquared => 0.5 * y.data().iter().map(|v| v * v).sum::<f64>(),
            Loss::Weighted(w) => w.data().iter().zip(y.data()).map(|(a, b)| a * b).sum(),
        }
    }

    pub fn gradient(&self, y: &Tensor) -> Tensor {
        let data = match self {
            Loss::Zero => vec![0.0; y.data().len()],
            Loss::Sum => vec![1.0; y.data().len()],
            Loss::HalfSquared => y.data().to_vec(),
            Loss::Weighted(w) => w.data().to_vec(),
        };
        Tensor::new(y.shape().to_vec(), data).expect("same shape")
    }
}

/// Gradients in the same layout as the layer's parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct SMoEGradients {
    pub w_g: Vec<f64>,
    pub w1: Vec<Vec<f64>>,
    pub b1: Vec<Vec<f64>>,
    pub w2: Vec<Vec<f64>>,
    pub b2: Vec<Vec<f64>>,
}

impl SMoEGradients {
    fn zeros(layer: &SMoELayer) -> Self {
        let per = |f: fn(&crate::expert::Expert) -> usize| layer.experts.iter().map(|e| vec![0.0; f(e)]).collect();
        Self {
            w_g: vec![0.0; layer.gating.w_g.data.len()],
            w1: per(|e| e.w1.data.len()),
            b1: per(|e| e.b1.len()),
            w2: per(|e| e.w2.data.len()),
            b2: per(|e| e.b2.len()),
        }
    }

    fn groups(&self) -> [(&'static str, Vec<f64>); 5] {
        let flat = |v: &Vec<Vec<f64>>| v.iter().flatten().copied().collect();
        [
            ("W_g", self.w_g.clone()),
            ("W1", flat(&self.w1)),
            ("b1", flat(&self.b1)),
            ("W2", flat(&self.w2)),
            ("b2", flat(&self.b2)),
        ]
    }
}

fn ensure_unnormalized(layer: &SMoELayer) -> Result<()> {
    if layer.gating.renormalize {
        Err(Error::Renormalized)
    } else {
        Ok(())
    }
}

/// Backpropagates `loss` through one S-MoE forward pass.
pub fn smoe_gradients(layer: &SMoELayer, features: &Tensor, loss: &Loss) -> Result<SMoEGradients> {
    ensure_unnormalized(layer)?;
    let (out, routes) = smoe_trace(layer, features)?;
    let upstream = loss.gradient(&out);
    let c = layer.gating.channels();
    let n = layer.gating.experts();
    let mut g = SMoEGradients::zeros(layer);

    for route in &routes {
        let s = &route.decision.softmax;
        let mut d_s = vec![0.0; n];
        for ((y, x), traces) in route.patch.positions().zip(&route.traces) {
            let g_tok = upstream.column(y, x);
            let token = features.column(y, x);
            for (&e, trace) in route.decision.selected.iter().zip(traces) {
                d_s[e] += g_tok.iter().zip(&trace.out).map(|(a, b)| a * b).sum::<f64>();

                let expert = &layer.experts[e];
                let hidden = expert.hidden();
                let g_out: Vec<f64> = g_tok.iter().map(|v| s[e] * v).collect();
                for (j, a) in trace.act.iter().enumerate() {
                    for (k, go) in g_out.iter().enumerate() {
                        g.w2[e][j * c + k] += a * go;
                    }
                }
                for (b, go) in g.b2[e].iter_mut().zip(&g_out) {
                    *b += go;
                }
                let d_pre: Vec<f64> = (0..hidden)
                    .map(|j| {
                        let row = &expert.w2.data[j * c..(j + 1) * c];
                        row.iter().zip(&g_out).map(|(w, go)| w * go).sum::<f64>() * gelu_derivative(trace.pre[j])
                    })
                    .collect();
                for (i, t) in token.iter().enumerate() {
                    for (j, dp) in d_pre.iter().enumerate() {
                        g.w1[e][i * hidden + j] += t * dp;
                    }
                }
                for (b, dp) in g.b1[e].iter_mut().zip(&d_pre) {
                    *b += dp;
                }
            }
        }
        // d s_e / d l_j = s_e (delta_ej - s_j)
        let mut d_logits = vec![0.0; n];
        for &e in &route.decision.selected {
            for (j, dl) in d_logits.iter_mut().enumerate() {
                let delta = if j == e { 1.0 } else { 0.0 };
                *dl += d_s[e] * s[e] * (delta - s[j]);
            }
        }
        for (j, dl) in d_logits.iter().enumerate() {
            for (k, xk) in route.descriptor.iter().enumerate() {
                g.w_g[j * c + k] += dl * xk;
            }
        }
    }
    Ok(g)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GradCheckConfig {
    pub epsilon: f64,
    pub tolerance: f64,
    /// Smallest logit gap between the k-th and (k+1)-th expert accepted.
    pub min_margin: f64,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        Self {
            epsilon: 1e-3,
            tolerance: 1e-4,
            min_margin: 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupCheck {
    pub name: String,
    pub parameters: usize,
    /// `|analytic - numeric| / max(|analytic|, |numeric|)` over the group (2-norms).
    pub relative_error: f64,
    pub max_abs_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradCheckReport {
    pub groups: Vec<GroupCheck>,
    pub max_relative_error: f64,
    pub min_routing_margin: f64,
    pub passed: bool,
}

fn param_groups_mut(layer: &mut SMoELayer) -> Vec<(usize, &mut [f64])> {
    let mut out: Vec<(usize, &mut [f64])> = vec![(0, layer.gating.w_g.data.as_mut_slice())];
    let mut w1 = Vec::new();
    let mut b1 = Vec::new();
    let mut w2 = Vec::new();
    let mut b2 = Vec::new();
    for e in &mut layer.experts {
        w1.push((1, e.w1.data.as_mut_slice()));
        b1.push((2, e.b1.as_mut_slice()));
        w2.push((3, e.w2.data.as_mut_slice()));
        b2.push((4, e.b2.as_mut_slice()));
    }
    out.extend(w1);
    out.extend(b1);
    out.extend(w2);
    out.extend(b2);
    out
}

/// Central-difference gradients in the same group order as the analytic ones.
fn numeric_gradients(layer: &SMoELayer, features: &Tensor, loss: &Loss, eps: f64) -> Result<[Vec<f64>; 5]> {
    let mut probe = layer.clone();
    let mut groups: [Vec<f64>; 5] = Default::default();
    let count = param_groups_mut(&mut probe).len();
    for slot in 0..count {
        let len = param_groups_mut(&mut probe)[slot].1.len();
        let group = param_groups_mut(&mut probe)[slot].0;
        for i in 0..len {
            let original = param_groups_mut(&mut probe)[slot].1[i];
            param_groups_mut(&mut probe)[slot].1[i] = original + eps;
            let up = loss.value(&smoe_trace(&probe, features)?.0);
            param_groups_mut(&mut probe)[slot].1[i] = original - eps;
            let down = loss.value(&smoe_trace(&probe, features)?.0);
            param_groups_mut(&mut probe)[slot].1[i] = original;
            groups[group].push((up - down) / (2.0 * eps));
        }
    }
    Ok(groups)
}

/// Compares analytic gradients against central finite differences.
/// Refuses points where a weight perturbation could flip the routing.
pub fn smoe_grad_check(
    layer: &SMoELayer,
    features: &Tensor,
    loss: &Loss,
    config: GradCheckConfig,
) -> Result<GradCheckReport> {
    ensure_unnormalized(layer)?;
    let (_, routes) = smoe_trace(layer, features)?;
    let k = layer.gating.k;
    let mut min_margin = f64::INFINITY;
    for (i, route) in routes.iter().enumerate() {
        if k == layer.gating.experts() {
            break;
        }
        let mut logits = layer.gating.logits(&route.descriptor);
        logits.sort_by(|a, b| b.total_cmp(a));
        let margin = logits[k - 1] - logits[k];
        let reach = route.descriptor.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let required = config.min_margin.max(2.0 * config.epsilon * reach);
        if margin < required {
            return Err(Error::RoutingTie {
                patch: i,
                margin,
                required,
            });
        }
        min_margin = min_margin.min(margin);
    }

    let analytic = smoe_gradients(layer, features, loss)?.groups();
    let numeric = numeric_gradients(layer, features, loss, config.epsilon)?;
    let mut groups = Vec::new();
    for ((name, a), n) in analytic.iter().zip(&numeric) {
        let diff: f64 = a.iter().zip(n).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
        let norm_a = a.iter().map(|x| x * x).sum::<f64>().sqrt();
        let norm_n = n.iter().map(|x| x * x).sum::<f64>().sqrt();
        let scale = norm_a.max(norm_n);
        groups.push(GroupCheck {
            name: name.to_string(),
            parameters: a.len(),
            relative_error: if scale == 0.0 { 0.0 } else { diff / scale },
            max_abs_error: a.iter().zip(n).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max),
        });
    }
    let max_relative_error = groups.iter().map(|g| g.relative_error).fold(0.0, f64::max);
    Ok(GradCheckReport {
        passed: max_relative_error < config.tolerance,
        groups,
        max_relative_error,
        min_routing_margin: min_margin,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expert::Expert;
    use crate::gating::GatingNetwork;
    use crate::tensor::Matrix;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn instance(seed: u64) -> (SMoELayer, Tensor) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layer = SMoELayer::random(4, 3, 2, 1, 7, &mut rng).unwrap();
        let x = Tensor::random_normal(vec![3, 14, 14], 1.0, &mut rng).unwrap();
        (layer, x)
    }

    #[test]
    fn zero_loss_gives_zero_gradients() {
        let (layer, x) = instance(1);
        let g = smoe_gradients(&layer, &x, &Loss::Zero).unwrap();
        assert!(g.groups().iter().all(|(_, v)| v.iter().all(|&e| e == 0.0)));
    }

    #[test]
    fn single_expert_matches_plain_ffn_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let layer = SMoELayer {
            gating: GatingNetwork::new(Matrix::random_normal(1, 3, 1.0, &mut rng), 1).unwrap(),
            experts: vec![Expert::random(3, 2, &mut rng)],
            patch_size: 7,
        };
        let x = Tensor::random_normal(vec![3, 7, 7], 1.0, &mut rng).unwrap();
        let report = smoe_grad_check(&layer, &x, &Loss::Sum, GradCheckConfig::default()).unwrap();
        assert!(report.passed, "{report:?}");
        // A single softmax entry is constant, so the gate receives no gradient.
        let g = smoe_gradients(&layer, &x, &Loss::Sum).unwrap();
        assert!(g.w_g.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn random_instances_pass() {
        let mut checked = 0;
        for seed in 0..10 {
            let (layer, x) = instance(100 + seed);
            match smoe_grad_check(&layer, &x, &Loss::HalfSquared, GradCheckConfig::default()) {
                Ok(report) => {
                    assert!(report.passed, "seed {seed}: {report:?}");
                    checked += 1;
                }
                Err(Error::RoutingTie { .. }) => {}
                Err(e) => panic!("{e}"),
            }
        }
        assert!(checked >= 8);
    }

    #[test]
    fn tie_is_refused() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let row: Vec<f64> = vec![0.4, -0.2, 0.9];
        let layer = SMoELayer {
            gating: GatingNetwork::new(Matrix::new(2, 3, [row.clone(), row].concat()).unwrap(), 1).unwrap(),
            experts: vec![Expert::random(3, 2, &mut rng), Expert::random(3, 2, &mut rng)],
            patch_size: 7,
        };
        let x = Tensor::random_normal(vec![3, 7, 7], 1.0, &mut rng).unwrap();
        assert!(matches!(
            smoe_grad_check(&layer, &x, &Loss::Sum, GradCheckConfig::default()),
            Err(Error::RoutingTie { .. })
        ));
    }
}
