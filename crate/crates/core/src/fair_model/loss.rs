//! Prediction loss, HEM-gated pairwise penalty and their gradients.

use serde::{Deserialize, Serialize};

use crate::corpus::LABEL_COUNT;
use crate::error::{Error, Result};

use super::network::{Gradients, Network};

pub const LOG_CLIP: f64 = 1e-7;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossConfig {
    /// Tolerance on normalized HEM differences.
    pub epsilon: f64,
    pub lambda: f64,
}

impl LossConfig {
    pub fn new(epsilon: f64, lambda: f64) -> Result<Self> {
        if !(epsilon >= 0.0 && lambda >= 0.0 && epsilon.is_finite() && lambda.is_finite()) {
            return Err(Error::invalid(format!(
                "epsilon and lambda must be finite and non-negative, got {epsilon} and {lambda}"
            )));
        }
        Ok(Self { epsilon, lambda })
    }
}

/// One training example: features, binary targets and normalized HEM.
#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub x: Vec<f64>,
    pub y: [f64; LABEL_COUNT],
    pub hem: [f64; 2],
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LossParts {
    pub pred: f64,
    pub hem: f64,
    pub total: f64,
}

fn clip(p: f64) -> f64 {
    p.clamp(LOG_CLIP, 1.0 - LOG_CLIP)
}

/// Mean binary cross-entropy over samples and labels.
pub fn pred_loss(pred: &[[f64; LABEL_COUNT]], y: &[[f64; LABEL_COUNT]]) -> f64 {
    let mut sum = 0.0;
    for (p, t) in pred.iter().zip(y) {
        for (&pk, &tk) in p.iter().zip(t) {
            let c = clip(pk);
            sum -= tk * c.ln() + (1.0 - tk) * (1.0 - c).ln();
        }
    }
    sum / (pred.len() * LABEL_COUNT) as f64
}

/// Both HEM components differ by less than `epsilon`.
pub fn hem_close(a: &[f64; 2], b: &[f64; 2], epsilon: f64) -> bool {
    (a[0] - b[0]).abs().max((a[1] - b[1]).abs()) < epsilon
}

fn sq_dist(a: &[f64; LABEL_COUNT], b: &[f64; LABEL_COUNT]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Mean over unordered pairs of the squared prediction distance, counted
/// only for pairs whose HEM values are within `epsilon`.
pub fn hem_penalty(pred: &[[f64; LABEL_COUNT]], hem: &[[f64; 2]], epsilon: f64) -> f64 {
    let n = pred.len();
    if n < 2 {
        return 0.0;
    }
    let mut sum = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            if hem_close(&hem[i], &hem[j], epsilon) {
                sum += sq_dist(&pred[i], &pred[j]);
            }
        }
    }
    sum / (n * (n - 1) / 2) as f64
}

pub fn total_loss(pred: &[[f64; LABEL_COUNT]], y: &[[f64; LABEL_COUNT]], hem: &[[f64; 2]], cfg: &LossConfig) -> LossParts {
    let p = pred_loss(pred, y);
    let h = hem_penalty(pred, hem, cfg.epsilon);
    LossParts {
        pred: p,
        hem: h,
        total: p + cfg.lambda * h,
    }
}

/// Derivative of the mean BCE with respect to the output logits. Outputs
/// outside the clip range have zero gradient.
fn bce_logit_grad(p: &[f64; LABEL_COUNT], y: &[f64; LABEL_COUNT], n: usize) -> [f64; LABEL_COUNT] {
    let scale = 1.0 / (n * LABEL_COUNT) as f64;
    let mut d = [0.0; LABEL_COUNT];
    for k in 0..LABEL_COUNT {
        if (LOG_CLIP..=1.0 - LOG_CLIP).contains(&p[k]) {
            d[k] = (p[k] - y[k]) * scale;
        }
    }
    d
}

fn forward_batch(net: &Network, batch: &[&Sample]) -> Result<Vec<super::network::Activations>> {
    batch.iter().map(|s| net.forward_cached(&s.x)).collect()
}

/// Plain cross-entropy loss and gradient over a batch.
pub fn bce_gradients(net: &Network, batch: &[&Sample]) -> Result<(f64, Gradients)> {
    let acts = forward_batch(net, batch)?;
    let n = batch.len();
    let mut grads = net.gradients_like();
    let preds: Vec<[f64; LABEL_COUNT]> = acts.iter().map(|a| a.output).collect();
    let ys: Vec<[f64; LABEL_COUNT]> = batch.iter().map(|s| s.y).collect();
    for (s, act) in batch.iter().zip(&acts) {
        let d = bce_logit_grad(&act.output, &s.y, n);
        net.backprop(&s.x, act, &d, &mut grads);
    }
    Ok((pred_loss(&preds, &ys), grads))
}

/// Loss parts and exact gradient of `pred + lambda * hem` over a batch.
/// The gate indicator is piecewise constant and contributes no gradient.
pub fn gradients(net: &Network, batch: &[&Sample], cfg: &LossConfig) -> Result<(LossParts, Gradients)> {
    let acts = forward_batch(net, batch)?;
    let n = batch.len();
    let preds: Vec<[f64; LABEL_COUNT]> = acts.iter().map(|a| a.output).collect();
    let ys: Vec<[f64; LABEL_COUNT]> = batch.iter().map(|s| s.y).collect();
    let hems: Vec<[f64; 2]> = batch.iter().map(|s| s.hem).collect();
    let parts = total_loss(&preds, &ys, &hems, cfg);

    let mut d_pred = vec![[0.0; LABEL_COUNT]; n];
    if n >= 2 {
        let scale = 2.0 / (n * (n - 1) / 2) as f64;
        for i in 0..n {
            for j in i + 1..n {
                if hem_close(&hems[i], &hems[j], cfg.epsilon) {
                    for k in 0..LABEL_COUNT {
                        let diff = scale * (preds[i][k] - preds[j][k]);
                        d_pred[i][k] += diff;
                        d_pred[j][k] -= diff;
                    }
                }
            }
        }
    }
    let mut grads = net.gradients_like();
    for (i, (s, act)) in batch.iter().zip(&acts).enumerate() {
        let mut d = bce_logit_grad(&act.output, &s.y, n);
        for k in 0..LABEL_COUNT {
            let p = act.output[k];
            d[k] += cfg.lambda * d_pred[i][k] * p * (1.0 - p);
        }
        net.backprop(&s.x, act, &d, &mut grads);
    }
    Ok((parts, grads))
}
